//! Single-trajectory runs with analytic predictions alongside.

use serde::Serialize;

use crate::dynamics::{self, FitResult, TimeSeries};
use crate::error::{Error, Result};
use crate::hilbert::{self, expectation, DensityOp, QuantumState, PHOTON, TLS, VIB};
use crate::linalg::{c, CMatrix, CVector};
use crate::models::{self, BasisKind, SystemParams};
use crate::scenarios::config::{Format, Initial, Model, ScenarioConfig};
use crate::scenarios::output;

/// A numeric estimate next to its closed-form value.
#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub quantity: String,
    pub analytic: f64,
    pub numeric: Option<FitResult>,
    pub rel_error: Option<f64>,
    /// Why the estimate is missing, or a caveat on the analytic value.
    pub note: Option<String>,
}

impl Comparison {
    fn new(quantity: &str, analytic: f64, fit: Result<FitResult>) -> Self {
        match fit {
            Ok(f) => Self {
                quantity: quantity.into(),
                analytic,
                rel_error: Some(((f.value - analytic) / analytic).abs()),
                numeric: Some(f),
                note: None,
            },
            Err(e) => Self {
                quantity: quantity.into(),
                analytic,
                numeric: None,
                rel_error: None,
                note: Some(e.to_string()),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateSummary {
    pub model: Model,
    pub initial: Initial,
    pub level: usize,
    pub params: SystemParams,
    pub delta: f64,
    pub omega: f64,
    pub comparisons: Vec<Comparison>,
    pub files: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SimulateOutput {
    pub summary: SimulateSummary,
    /// Named series, one per reported frame.
    pub series: Vec<(String, TimeSeries)>,
}

fn manifold_space() -> Result<hilbert::ProductSpace> {
    hilbert::make_space(&[(TLS, 2), (PHOTON, 1)])
}

/// Run the configured trajectory without writing anything.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimulateOutput> {
    let p = &cfg.system;
    let times = dynamics::linspace(cfg.run.t_max, cfg.run.n_samples);
    let (series, comparisons) = match cfg.run.model {
        Model::Jc => simulate_jc(cfg, &times)?,
        Model::Vibronic => simulate_vibronic(cfg, &times)?,
        Model::Dissipative => simulate_dissipative(cfg, &times)?,
    };
    Ok(SimulateOutput {
        summary: SimulateSummary {
            model: cfg.run.model,
            initial: cfg.run.initial,
            level: cfg.run.level,
            params: p.clone(),
            delta: p.delta(),
            omega: p.omega()?,
            comparisons,
            files: Vec::new(),
        },
        series,
    })
}

type Produced = (Vec<(String, TimeSeries)>, Vec<Comparison>);

fn simulate_jc(cfg: &ScenarioConfig, times: &[f64]) -> Result<Produced> {
    let p = &cfg.system;
    let space = manifold_space()?;
    let h = models::build_jc(p, &space)?;
    let ds = models::basis_set(p, BasisKind::Ds, &space)?;
    let psi0 = match cfg.run.initial {
        Initial::SwitchOn => dynamics::switch_on_state(p, &space)?,
        Initial::Xi1 | Initial::Xi2 => {
            let label = if cfg.run.initial == Initial::Xi1 { "xi1" } else { "xi2" };
            let k = ds.labels.iter().position(|l| l == label).expect("dressed labels");
            QuantumState::new(space.clone(), ds.frame.column(k).into_owned())?
        }
    };
    let ev = dynamics::evolve_state(&h, &psi0, times)?;
    let mut out = Vec::new();
    for &kind in &cfg.run.bases {
        if matches!(kind, BasisKind::Dds | BasisKind::Pos) {
            return Err(Error::param(
                "run.bases",
                format!("`{}` needs the vibronic model", kind.name()),
            ));
        }
        let basis = models::basis_set(p, kind, &space)?;
        out.push((kind.name().to_string(), dynamics::populations_in_basis(&ev, &basis)?));
    }
    let bare = dynamics::populations_in_basis(&ev, &models::basis_set(p, BasisKind::Bs, &space)?)?;
    let omega = p.omega()?;
    let cmp = Comparison::new("rabi_frequency", 2.0 * omega, dynamics::dominant_frequency(&bare, "phi1"));
    Ok((out, vec![cmp]))
}

fn vibronic_initial(p: &SystemParams, initial: Initial, level: usize, space: &hilbert::ProductSpace) -> Result<QuantumState> {
    match initial {
        Initial::Xi1 => QuantumState::basis(space, &[(TLS, 0), (VIB, level)]),
        Initial::Xi2 => QuantumState::basis(space, &[(TLS, 1), (VIB, level)]),
        Initial::SwitchOn => {
            let d = p.dressed()?;
            let mut amps = CVector::zeros(space.dim());
            amps[space.index_from_labels(&[(TLS, 0), (VIB, level)])?] = c(d.u_minus);
            amps[space.index_from_labels(&[(TLS, 1), (VIB, level)])?] = c(d.u_plus);
            QuantumState::new(space.clone(), amps)
        }
    }
}

fn simulate_vibronic(cfg: &ScenarioConfig, times: &[f64]) -> Result<Produced> {
    let p = &cfg.system;
    let space = hilbert::make_space(&[(TLS, 2), (PHOTON, 1), (VIB, p.n_vib)])?;
    let level = cfg.run.level;
    if level >= p.n_vib {
        return Err(Error::param("run.level", format!("must be < n_vib = {}", p.n_vib)));
    }
    let h = models::build_vibronic(p, &space)?;
    let psi0 = vibronic_initial(p, cfg.run.initial, level, &space)?;
    let ev = dynamics::evolve_state(&h, &psi0, times)?;

    let tls = dynamics::tls_populations(&ev)?;
    let parity = models::parity_op(&space)?;
    let mut summary = TimeSeries::new(times.to_vec())?;
    summary.push("xi1", tls.channel("upper")?.to_vec())?;
    summary.push("xi2", tls.channel("lower")?.to_vec())?;
    summary.push(
        "parity",
        ev.states
            .iter()
            .map(|s| expectation(&parity, s).map(|z| z.re))
            .collect::<Result<_>>()?,
    )?;
    let mut out = vec![("tls".to_string(), summary.clone())];
    for &kind in &cfg.run.bases {
        let basis = models::vibronic_basis(p, kind, &space)?;
        out.push((kind.name().to_string(), dynamics::populations_in_basis(&ev, &basis)?));
    }

    // the pair {|xi1, k>, |xi2, k+1>} holding the initial upper component
    let pair = match cfg.run.initial {
        Initial::Xi2 if level == 0 => None,
        Initial::Xi2 => Some(level - 1),
        _ => Some(level),
    };
    let cmp = match pair {
        Some(k) => {
            let (lo, hi) = models::pair_levels(p, k)?;
            let mut cmp = Comparison::new("vibronic_rabi_frequency", hi - lo, dynamics::dominant_frequency(&summary, "xi1"));
            let mismatch = (p.omega()? - p.omega_v).abs() / p.omega_v.max(f64::MIN_POSITIVE);
            if mismatch > 0.05 && cmp.note.is_none() {
                cmp.note = Some(format!("off resonance (|Omega - Omega_v| / Omega_v = {mismatch:.3})"));
            }
            cmp
        }
        None => Comparison {
            quantity: "vibronic_rabi_frequency".into(),
            analytic: 0.0,
            numeric: None,
            rel_error: None,
            note: Some("|xi2, 0> is uncoupled and stationary".into()),
        },
    };
    Ok((out, vec![cmp]))
}

fn simulate_dissipative(cfg: &ScenarioConfig, times: &[f64]) -> Result<Produced> {
    let p = &cfg.system;
    let ch = dynamics::dressed_channel(p)?;
    let d = p.dressed()?;
    let (p1, p2) = match cfg.run.initial {
        Initial::SwitchOn => (d.u_minus.powi(2), d.u_plus.powi(2)),
        Initial::Xi1 => (1.0, 0.0),
        Initial::Xi2 => (0.0, 1.0),
    };
    let space = ch.hamiltonian.space().clone();
    let rho0 = DensityOp::new(space, CMatrix::from_diagonal(&CVector::from_vec(vec![c(p1), c(p2)])))?;
    let ev = dynamics::evolve_lindblad(&ch.hamiltonian, &ch.jumps, &ch.rates, &rho0, times)?;
    let tls = dynamics::tls_populations(&ev)?;
    let closed = dynamics::reduced_ds_relaxation(ch.gamma, (p1, p2), times)?;
    let rho11 = tls.channel("upper")?.to_vec();
    let rho22 = tls.channel("lower")?.to_vec();
    let diff: Vec<f64> = rho11.iter().zip(&rho22).map(|(a, b)| a - b).collect();
    let omega = p.omega()?;
    // kinetic-energy bookkeeping: minus the change of the dressed-population energy
    let bookkeeping: Vec<f64> = diff.iter().map(|x| -omega * (x - diff[0])).collect();
    let mut series = TimeSeries::new(times.to_vec())?;
    series.push("rho11", rho11)?;
    series.push("rho22", rho22)?;
    series.push("diff", diff)?;
    series.push("diff_closed_form", closed.channel("diff")?.to_vec())?;
    series.push("de_kin_bookkeeping", bookkeeping)?;
    let cmp = Comparison::new("relaxation_rate", 2.0 * ch.gamma, dynamics::fit_exponential(&series, "diff"));
    Ok((vec![("ds".to_string(), series)], vec![cmp]))
}

/// Run and write `simulate_<frame>.csv` and `simulate_summary.json` into the
/// output directory.
pub fn run_simulate(cfg: &ScenarioConfig) -> Result<SimulateOutput> {
    let mut out = simulate(cfg)?;
    let dir = &cfg.output.directory;
    output::ensure_dir(dir)?;
    if cfg.output.wants(Format::Csv) {
        for (name, series) in &out.series {
            let file = format!("simulate_{name}.csv");
            output::write_series(&dir.join(&file), series)?;
            out.summary.files.push(file);
        }
    }
    if cfg.output.wants(Format::Json) {
        out.summary.files.push("simulate_summary.json".into());
        output::write_json(&dir.join("simulate_summary.json"), &out.summary)?;
    }
    Ok(out)
}
