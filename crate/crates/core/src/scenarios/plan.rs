//! Rectangular-pulse planner for a target kinetic-energy change.
//!
//! All inputs and outputs are SI (angular s^-1, s, kg, J). The dressed-state
//! formulas are homogeneous in frequency, so they apply to SI numbers
//! directly with the collective coupling `G = g0 sqrt(m+1)` in place of `g0`
//! and `m = 0`.

use serde::Serialize;

use crate::analytics;
use crate::error::{Error, Result};
use crate::scenarios::config::{Direction, Format, PlanInputs, ScenarioConfig};
use crate::scenarios::output;
use crate::scenarios::units::{HBAR, SPEED_OF_LIGHT};

pub const MIN_RABI_OVER_LINEWIDTH: f64 = 100.0;
pub const MIN_RABI_OVER_DOPPLER: f64 = 10.0;
pub const MAX_SWITCHING_PHASE: f64 = 0.1;
pub const DETUNING_RATIO_RANGE: (f64, f64) = (0.1, 10.0);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidityCheck {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: String,
    /// Distance to the threshold as a ratio; above 1 means satisfied.
    pub margin: f64,
}

fn at_least(name: &str, value: f64, min: f64) -> ValidityCheck {
    ValidityCheck {
        name: name.into(),
        passed: value >= min,
        value,
        threshold: format!(">= {min}"),
        margin: value / min,
    }
}

fn at_most(name: &str, value: f64, max: f64) -> ValidityCheck {
    ValidityCheck {
        name: name.into(),
        passed: value <= max,
        value,
        threshold: format!("<= {max}"),
        margin: max / value,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PulsePlan {
    pub direction: Direction,
    pub delta: f64,
    pub omega: f64,
    /// Implied collective coupling `g0 sqrt(m+1)`.
    pub coupling: f64,
    pub gamma0: f64,
    pub gamma: f64,
    pub eps_eq: f64,
    pub duration: f64,
    /// Duration in excited-state lifetimes, `gamma0 * duration`.
    pub duration_lifetimes: f64,
    /// `|exp(-2 gamma duration) - eps_eq|`.
    pub equilibration_residual: f64,
    /// Kinetic-energy change per atom, angular units.
    pub de_kin: f64,
    pub de_kin_joule: f64,
    pub displacement_amplitude: f64,
    pub doppler: f64,
    pub validity: Vec<ValidityCheck>,
    pub notes: Vec<String>,
}

/// Build a plan, or explain which constraint cannot be met.
pub fn plan_pulse(inputs: &PlanInputs, eps_eq: f64) -> Result<PulsePlan> {
    let ratio = inputs.detuning_ratio;
    let (delta, coupling) = match (inputs.delta, inputs.energy) {
        (Some(d), _) => {
            if d == 0.0 {
                return Err(zero_detuning());
            }
            (d, d.abs() / (2.0 * ratio))
        }
        (None, Some(e)) => {
            let mag = 2.0 * e / HBAR;
            (signed(mag, inputs.direction), mag / (2.0 * ratio))
        }
        (None, None) => {
            // Omega = G sqrt(ratio^2 + 1) with |delta| = 2 ratio G
            let g = inputs.rabi / (ratio * ratio + 1.0).sqrt();
            (signed(2.0 * ratio * g, inputs.direction), g)
        }
    };
    let direction = if delta > 0.0 { Direction::Cooling } else { Direction::Heating };
    let omega = analytics::rabi(delta, coupling, 0)?;
    let gamma = analytics::decay_rate(delta, coupling, 0, inputs.gamma0)?.gamma;
    let duration = (1.0 / eps_eq).ln() / (2.0 * gamma);
    let de_kin = analytics::energy_balance(delta, coupling, 0)?.de_kin;
    let doppler = inputs
        .doppler
        .unwrap_or(inputs.transition_frequency * inputs.velocity / SPEED_OF_LIGHT);
    // displacement amplitude sqrt(hbar / (4 Omega M)) restores hbar for SI
    let displacement_amplitude = (HBAR / (4.0 * omega * inputs.mass)).sqrt();

    let actual_ratio = delta.abs() / (2.0 * coupling);
    let (lo, hi) = DETUNING_RATIO_RANGE;
    let validity = vec![
        at_least("rabi_over_linewidth", omega / inputs.gamma0, MIN_RABI_OVER_LINEWIDTH),
        at_least("rabi_over_doppler", omega / doppler, MIN_RABI_OVER_DOPPLER),
        at_most("sudden_switching", inputs.rise_time * delta.abs(), MAX_SWITCHING_PHASE),
        ValidityCheck {
            name: "detuning_comparable_to_rabi".into(),
            passed: (lo..=hi).contains(&actual_ratio),
            value: actual_ratio,
            threshold: format!("in [{lo}, {hi}]"),
            margin: (actual_ratio / lo).min(hi / actual_ratio),
        },
    ];
    if let Some(binding) = validity
        .iter()
        .filter(|c| !c.passed)
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
    {
        return Err(Error::Infeasible {
            constraint: binding.name.clone(),
            detail: format!("value {:.6e}, required {}", binding.value, binding.threshold),
        });
    }

    Ok(PulsePlan {
        direction,
        delta,
        omega,
        coupling,
        gamma0: inputs.gamma0,
        gamma,
        eps_eq,
        duration,
        duration_lifetimes: duration * inputs.gamma0,
        equilibration_residual: ((-2.0 * gamma * duration).exp() - eps_eq).abs(),
        de_kin,
        de_kin_joule: HBAR * de_kin,
        displacement_amplitude,
        doppler,
        validity,
        notes: vec![
            "duration = ln(1/eps_eq) / (2 gamma): the dressed-state populations equalize over \
             tens of excited-state lifetimes, so a pulse of order 0.1/gamma0 would leave the \
             transfer incomplete"
                .into(),
            "de_kin is the asymptotic change -delta/2 per atom; positive detuning cools".into(),
        ],
    })
}

fn signed(mag: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Cooling => mag,
        Direction::Heating => -mag,
    }
}

fn zero_detuning() -> Error {
    Error::Infeasible {
        constraint: "zero_detuning_no_transfer".into(),
        detail: "at delta = 0 both dressed states start equally populated, so relaxation \
                 moves no kinetic energy"
            .into(),
    }
}

/// Plan and write `plan.json`.
pub fn run_plan(cfg: &ScenarioConfig) -> Result<PulsePlan> {
    let plan = plan_pulse(&cfg.plan, cfg.run.eps_eq)?;
    if cfg.output.wants(Format::Json) {
        output::ensure_dir(&cfg.output.directory)?;
        output::write_json(&cfg.output.directory.join("plan.json"), &plan)?;
    }
    Ok(plan)
}
