//! Scenario configuration: a TOML document with `[system]`, `[run]`,
//! `[plan]` and `[output]` tables. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::error::{Error, Result};
use crate::models::{BasisKind, SystemParams};
use crate::scenarios::units::UnitSystem;

pub const DEFAULT_N_VIB: usize = 40;
pub const DEFAULT_EPS_EQ: f64 = 0.01;
pub const DEFAULT_N_SAMPLES: usize = 1024;
pub const DEFAULT_MAX_POINTS: usize = 100_000;
pub const DEFAULT_FREQUENCY_UNIT: f64 = 1e9;
pub const DEFAULT_LENGTH_UNIT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Simulate,
    Sweep,
    Verify,
    PlanPulse,
}

impl RunKind {
    pub fn name(self) -> &'static str {
        match self {
            RunKind::Simulate => "simulate",
            RunKind::Sweep => "sweep",
            RunKind::Verify => "verify",
            RunKind::PlanPulse => "plan-pulse",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Natural,
    Si,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Bare two-level atom in one photon manifold.
    #[default]
    Jc,
    /// Dressed atom coupled to the centre-of-mass vibration.
    Vibronic,
    /// Dressed two-level relaxation.
    Dissipative,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    /// Bare ground state when the pulse switches on.
    #[default]
    SwitchOn,
    Xi1,
    Xi2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Cooling,
    Heating,
}

/// Grid axis: an explicit list or an inclusive evenly spaced range.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range { from: f64, to: f64, steps: usize },
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            Axis::Values(ref v) => Ok(v.clone()),
            Axis::Range { from, to, steps } => match steps {
                0 => Err(Error::param("run.sweep", "axis needs at least one step")),
                1 => Ok(vec![from]),
                _ => Ok((0..steps)
                    .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
                    .collect()),
            },
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    units: Option<Units>,
    frequency_unit: Option<f64>,
    length_unit: Option<f64>,
    delta: Option<f64>,
    epsilon: Option<f64>,
    omega0: Option<f64>,
    g0: Option<f64>,
    m: Option<u32>,
    gamma0: Option<f64>,
    omega_v: Option<f64>,
    mass: Option<f64>,
    f1: Option<[[f64; 2]; 2]>,
    f2: Option<[[f64; 2]; 2]>,
    n_vib: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    delta: Option<Axis>,
    g0: Option<Axis>,
    m: Option<Vec<u32>>,
    max_points: Option<usize>,
    lindblad: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    kind: Option<RunKind>,
    model: Option<Model>,
    t_max: Option<f64>,
    n_samples: Option<usize>,
    initial: Option<Initial>,
    level: Option<usize>,
    bases: Option<Vec<BasisKind>>,
    eps_eq: Option<f64>,
    inject_fault: Option<bool>,
    seed: Option<u64>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    direction: Option<Direction>,
    gamma0: Option<f64>,
    rabi: Option<f64>,
    delta: Option<f64>,
    energy: Option<f64>,
    detuning_ratio: Option<f64>,
    rise_time: Option<f64>,
    doppler: Option<f64>,
    transition_frequency: Option<f64>,
    velocity: Option<f64>,
    mass: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<PathBuf>,
    formats: Option<Vec<Format>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    plan: RawPlan,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub delta: Vec<f64>,
    pub g0: Vec<f64>,
    pub m: Vec<u32>,
    pub max_points: usize,
    /// Also fit the Lindblad relaxation rate at every point.
    pub lindblad: bool,
}

impl SweepConfig {
    pub fn points(&self) -> usize {
        self.delta.len() * self.g0.len() * self.m.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub kind: Option<RunKind>,
    pub model: Model,
    /// Natural time units.
    pub t_max: f64,
    pub n_samples: usize,
    pub initial: Initial,
    /// Vibrational level of the initial state.
    pub level: usize,
    pub bases: Vec<BasisKind>,
    pub eps_eq: f64,
    pub inject_fault: bool,
    pub seed: u64,
    pub sweep: Option<SweepConfig>,
}

/// Pulse-planner inputs, all SI: rates and frequencies in s^-1 (angular),
/// times in s, masses in kg, energies in J, velocities in m/s.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanInputs {
    pub direction: Direction,
    pub gamma0: f64,
    /// Target Rabi frequency. Ignored when `energy` is set.
    pub rabi: f64,
    /// Explicit signed detuning; overrides `direction` and `detuning_ratio`.
    pub delta: Option<f64>,
    /// Target kinetic-energy change magnitude per atom.
    pub energy: Option<f64>,
    /// `|delta| / (2 g0 sqrt(m+1))`.
    pub detuning_ratio: f64,
    pub rise_time: f64,
    /// Explicit Doppler shift; otherwise `transition_frequency * velocity / c`.
    pub doppler: Option<f64>,
    pub transition_frequency: f64,
    pub velocity: f64,
    pub mass: f64,
}

impl Default for PlanInputs {
    fn default() -> Self {
        Self {
            direction: Direction::Cooling,
            gamma0: 1e8,
            rabi: 2e10,
            delta: None,
            energy: None,
            detuning_ratio: 1.0,
            rise_time: 1e-12,
            doppler: None,
            transition_frequency: 1e15,
            velocity: 500.0,
            mass: 3.8e-26,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    /// Physical parameters in natural units.
    pub system: SystemParams,
    pub units: Units,
    pub unit_system: Option<UnitSystem>,
    pub run: RunConfig,
    pub plan: PlanInputs,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        parse_config("").expect("empty config is valid")
    }
}

fn config_err(path: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        reason: reason.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(path, format!("must be finite and > 0, got {v}")))
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| config_err("", e.message()))?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_err(if path == "." { "" } else { &path }, e.inner().message())
    })?;
    build(raw)
}

pub fn load_config(path: &std::path::Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(&path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

fn build(raw: RawConfig) -> Result<ScenarioConfig> {
    let s = raw.system;
    let units = s.units.unwrap_or_default();
    let unit_system = match units {
        Units::Natural => {
            if s.frequency_unit.is_some() || s.length_unit.is_some() {
                return Err(config_err(
                    "system.frequency_unit",
                    "unit scales are only meaningful with units = \"si\"",
                ));
            }
            None
        }
        Units::Si => Some(
            UnitSystem::new(
                s.frequency_unit.unwrap_or(DEFAULT_FREQUENCY_UNIT),
                s.length_unit.unwrap_or(DEFAULT_LENGTH_UNIT),
            )
            .map_err(|e| config_err("system.frequency_unit", e.to_string()))?,
        ),
    };
    let rate = |v: f64| unit_system.map_or(v, |u| u.rate_to_natural(v));
    let time = |v: f64| unit_system.map_or(v, |u| u.time_to_natural(v));
    let force = |v: f64| unit_system.map_or(v, |u| v / u.force_unit());
    let gradient = |v: f64| unit_system.map_or(v, |u| v / u.gradient_unit());

    let (epsilon, omega0) = match (s.delta, s.epsilon, s.omega0) {
        (d, None, w) => {
            let w = w.unwrap_or(0.0);
            (w + d.unwrap_or(0.0), w)
        }
        (None, Some(e), w) => (e, w.unwrap_or(0.0)),
        (Some(d), Some(e), w) => {
            let w = w.unwrap_or(0.0);
            if (e - w - d).abs() > 1e-12 * (1.0 + e.abs()) {
                return Err(config_err(
                    "system.delta",
                    "inconsistent with system.epsilon - system.omega0",
                ));
            }
            (e, w)
        }
    };
    let map2 = |m: [[f64; 2]; 2], f: &dyn Fn(f64) -> f64| m.map(|row| row.map(f));
    let mut system = SystemParams {
        epsilon: rate(epsilon),
        omega0: rate(omega0),
        g0: rate(s.g0.unwrap_or(1.0)),
        m: s.m.unwrap_or(0),
        gamma0: rate(s.gamma0.unwrap_or(0.0)),
        omega_v: 0.0,
        mass: unit_system.map_or(s.mass.unwrap_or(1.0), |u| u.mass_to_natural(s.mass.unwrap_or(u.mass_unit()))),
        f1: map2(s.f1.unwrap_or_default(), &force),
        f2: map2(s.f2.unwrap_or_default(), &gradient),
        n_vib: s.n_vib.unwrap_or(DEFAULT_N_VIB),
    };
    system.omega_v = match s.omega_v {
        Some(w) => rate(w),
        None if system.f1[0][1] != 0.0 => {
            // coupling from the displacement amplitude and the off-diagonal force
            let omega = system.omega().map_err(|e| config_err("system", e.to_string()))?;
            let dr = analytics::displacement_amplitude(omega, system.mass)
                .map_err(|e| config_err("system.mass", e.to_string()))?;
            analytics::vibronic_coupling(dr, system.f1[0][1])
        }
        None => 0.0,
    };
    system
        .validate()
        .map_err(|e| config_err("system", e.to_string()))?;

    let r = raw.run;
    let t_max = positive("run.t_max", time(r.t_max.unwrap_or(20.0)))?;
    let n_samples = r.n_samples.unwrap_or(DEFAULT_N_SAMPLES);
    if n_samples < 2 {
        return Err(config_err("run.n_samples", "need at least 2 samples"));
    }
    let eps_eq = r.eps_eq.unwrap_or(DEFAULT_EPS_EQ);
    if !(eps_eq > 0.0 && eps_eq < 1.0) {
        return Err(config_err("run.eps_eq", "must lie in (0, 1)"));
    }
    let sweep = match r.sweep {
        None => None,
        Some(sw) => {
            let delta = match sw.delta {
                Some(a) => a.values()?.into_iter().map(rate).collect(),
                None => vec![system.delta()],
            };
            let g0 = match sw.g0 {
                Some(a) => a.values()?.into_iter().map(rate).collect(),
                None => vec![system.g0],
            };
            let m = sw.m.unwrap_or_else(|| vec![system.m]);
            if delta.is_empty() || g0.is_empty() || m.is_empty() {
                return Err(config_err("run.sweep", "axes must be nonempty"));
            }
            if g0.iter().any(|&g: &f64| !(g >= 0.0)) {
                return Err(config_err("run.sweep.g0", "values must be >= 0"));
            }
            Some(SweepConfig {
                delta,
                g0,
                m,
                max_points: sw.max_points.unwrap_or(DEFAULT_MAX_POINTS),
                lindblad: sw.lindblad.unwrap_or(false),
            })
        }
    };
    if r.kind == Some(RunKind::Sweep) && sweep.is_none() {
        return Err(config_err("run.sweep", "a sweep run needs [run.sweep] axes"));
    }
    let run = RunConfig {
        kind: r.kind,
        model: r.model.unwrap_or_default(),
        t_max,
        n_samples,
        initial: r.initial.unwrap_or_default(),
        level: r.level.unwrap_or(0),
        bases: r.bases.unwrap_or_else(|| vec![BasisKind::Bs, BasisKind::Ds]),
        eps_eq,
        inject_fault: r.inject_fault.unwrap_or(false),
        seed: r.seed.unwrap_or(0),
        sweep,
    };

    let p = raw.plan;
    let d = PlanInputs::default();
    let plan = PlanInputs {
        direction: p.direction.unwrap_or(d.direction),
        gamma0: positive("plan.gamma0", p.gamma0.unwrap_or(d.gamma0))?,
        rabi: positive("plan.rabi", p.rabi.unwrap_or(d.rabi))?,
        delta: p.delta,
        energy: p.energy.map(|e| positive("plan.energy", e)).transpose()?,
        detuning_ratio: positive("plan.detuning_ratio", p.detuning_ratio.unwrap_or(d.detuning_ratio))?,
        rise_time: positive("plan.rise_time", p.rise_time.unwrap_or(d.rise_time))?,
        doppler: p.doppler.map(|x| positive("plan.doppler", x)).transpose()?,
        transition_frequency: positive(
            "plan.transition_frequency",
            p.transition_frequency.unwrap_or(d.transition_frequency),
        )?,
        velocity: positive("plan.velocity", p.velocity.unwrap_or(d.velocity))?,
        mass: positive("plan.mass", p.mass.unwrap_or(d.mass))?,
    };

    let o = raw.output;
    let formats = o.formats.unwrap_or_else(|| vec![Format::Csv, Format::Json]);
    if formats.is_empty() {
        return Err(config_err("output.formats", "at least one format is required"));
    }
    Ok(ScenarioConfig {
        system,
        units,
        unit_system,
        run,
        plan,
        output: OutputConfig {
            directory: o.directory.unwrap_or_else(|| PathBuf::from("out")),
            formats,
        },
    })
}
