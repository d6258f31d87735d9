//! Parameter grids over detuning, coupling and photon number.

use serde::Serialize;

use crate::analytics;
use crate::dynamics;
use crate::error::{Error, Result};
use crate::hilbert::{self, DensityOp, PHOTON, TLS};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::models::{self, SystemParams};
use crate::par::{self, Execution};
use crate::scenarios::config::{Format, ScenarioConfig, SweepConfig};
use crate::scenarios::output::{self, Cell};

/// Rough per-point cost used for the refusal message, in seconds.
const COST_CLOSED_FORM: f64 = 2e-5;
const COST_LINDBLAD: f64 = 5e-2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub delta: f64,
    pub g0: f64,
    pub m: u32,
    pub omega: f64,
    pub u_plus_sq: f64,
    pub u_minus_sq: f64,
    pub gamma: f64,
    pub de_kin: f64,
    pub de_kin_sign: i8,
    /// `|2 Omega (u+^2 - u-^2) - delta|`.
    pub identity_residual: f64,
    /// Relative error of the numeric manifold eigen-gap against `2 Omega`.
    pub gap_rel_error: f64,
    /// Relative error of the fitted Lindblad rate against `2 gamma`.
    pub lindblad_rel_error: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Point {
    delta: f64,
    g0: f64,
    m: u32,
}

fn grid(sw: &SweepConfig) -> Vec<Point> {
    let mut out = Vec::with_capacity(sw.points());
    for &delta in &sw.delta {
        for &g0 in &sw.g0 {
            for &m in &sw.m {
                out.push(Point { delta, g0, m });
            }
        }
    }
    out
}

fn lindblad_rate_error(params: &SystemParams) -> Result<f64> {
    let ch = dynamics::dressed_channel(params)?;
    if ch.gamma <= 0.0 {
        return Err(Error::Degenerate("zero relaxation rate".into()));
    }
    let rho0 = DensityOp::new(
        ch.hamiltonian.space().clone(),
        CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(0.0)])),
    )?;
    let times = dynamics::linspace(3.0 / ch.gamma, 120);
    let ev = dynamics::evolve_lindblad(&ch.hamiltonian, &ch.jumps, &ch.rates, &rho0, &times)?;
    let tls = dynamics::tls_populations(&ev)?;
    let mut diff = dynamics::TimeSeries::new(times)?;
    diff.push(
        "diff",
        tls.channel("upper")?
            .iter()
            .zip(tls.channel("lower")?)
            .map(|(a, b)| a - b)
            .collect(),
    )?;
    let fit = dynamics::fit_exponential(&diff, "diff")?;
    Ok((fit.value - 2.0 * ch.gamma).abs() / (2.0 * ch.gamma))
}

fn evaluate(index: usize, pt: Point, base: &SystemParams, lindblad: bool) -> Result<SweepRow> {
    let params = SystemParams {
        epsilon: base.omega0 + pt.delta,
        g0: pt.g0,
        m: pt.m,
        ..base.clone()
    };
    let d = params.dressed()?;
    let decay = analytics::decay_rate(pt.delta, pt.g0, pt.m, params.gamma0)?;
    let balance = analytics::energy_balance(pt.delta, pt.g0, pt.m)?;
    let space = hilbert::make_space(&[(TLS, 2), (PHOTON, 1)])?;
    let (values, _) = linalg::hermitian_eigen(models::build_jc(&params, &space)?.matrix());
    let gap = values[1] - values[0];
    let lindblad_rel_error = if lindblad && params.gamma0 > 0.0 && pt.g0 > 0.0 {
        Some(lindblad_rate_error(&params)?)
    } else {
        None
    };
    Ok(SweepRow {
        index,
        delta: pt.delta,
        g0: pt.g0,
        m: pt.m,
        omega: d.omega,
        u_plus_sq: d.u_plus * d.u_plus,
        u_minus_sq: d.u_minus * d.u_minus,
        gamma: decay.gamma,
        de_kin: balance.de_kin,
        de_kin_sign: balance.sign,
        identity_residual: balance.identity_residual,
        gap_rel_error: (gap - 2.0 * d.omega).abs() / (2.0 * d.omega),
        lindblad_rel_error,
    })
}

/// Evaluate every grid point; rows come back in grid order whatever the
/// execution mode.
pub fn sweep(cfg: &ScenarioConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    let sw = cfg
        .run
        .sweep
        .as_ref()
        .ok_or_else(|| Error::param("run.sweep", "no sweep axes configured"))?;
    let points = sw.points();
    if points > sw.max_points {
        let per = if sw.lindblad { COST_LINDBLAD } else { COST_CLOSED_FORM };
        return Err(Error::GridTooLarge {
            points,
            cap: sw.max_points,
            estimate_s: points as f64 * per,
        });
    }
    let pts = grid(sw);
    par::map_ordered(&pts, exec, |i, &pt| evaluate(i, pt, &cfg.system, sw.lindblad))
        .into_iter()
        .collect()
}

pub fn sweep_table(rows: &[SweepRow], lindblad: bool) -> (Vec<&'static str>, Vec<Vec<Cell>>) {
    let mut header = vec![
        "delta",
        "g0",
        "m",
        "omega",
        "u_plus_sq",
        "u_minus_sq",
        "gamma",
        "de_kin",
        "de_kin_sign",
        "identity_residual",
        "gap_rel_error",
    ];
    if lindblad {
        header.push("lindblad_rel_error");
    }
    let body = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                Cell::Float(r.delta),
                Cell::Float(r.g0),
                Cell::Int(r.m as i64),
                Cell::Float(r.omega),
                Cell::Float(r.u_plus_sq),
                Cell::Float(r.u_minus_sq),
                Cell::Float(r.gamma),
                Cell::Float(r.de_kin),
                Cell::Int(r.de_kin_sign as i64),
                Cell::Float(r.identity_residual),
                Cell::Float(r.gap_rel_error),
            ];
            if lindblad {
                row.push(Cell::Float(r.lindblad_rel_error.unwrap_or(f64::NAN)));
            }
            row
        })
        .collect();
    (header, body)
}

/// Run the sweep and write `sweep.csv` and/or `sweep.json`.
pub fn run_sweep(cfg: &ScenarioConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    let rows = sweep(cfg, exec)?;
    let lindblad = cfg.run.sweep.as_ref().is_some_and(|s| s.lindblad);
    let dir = &cfg.output.directory;
    output::ensure_dir(dir)?;
    if cfg.output.wants(Format::Csv) {
        let (header, body) = sweep_table(&rows, lindblad);
        output::write_csv(&dir.join("sweep.csv"), &header, &body)?;
    }
    if cfg.output.wants(Format::Json) {
        output::write_json(&dir.join("sweep.json"), &rows)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::config::parse_config;

    fn config(extra: &str) -> ScenarioConfig {
        parse_config(&format!(
            "[system]\ngamma0 = 1\n[run]\nkind = \"sweep\"\n[run.sweep]\ndelta = {{ from = -5, to = 5, steps = 11 }}\ng0 = [0.5, 1, 2]\nm = [0, 1, 2, 3, 4]\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn sign_flips_at_zero_and_gamma_peaks() {
        let rows = sweep(&config(""), Execution::Sequential).unwrap();
        assert_eq!(rows.len(), 165);
        for r in &rows {
            assert_eq!(r.de_kin_sign, -(r.delta.signum() as i8) * (r.delta != 0.0) as i8);
            assert!(((r.u_plus_sq - r.u_minus_sq) - r.delta / (2.0 * r.omega)).abs() < 1e-12);
            assert!(r.gap_rel_error < 1e-10);
        }
        for g in [0.5, 1.0, 2.0] {
            for m in 0..5 {
                let best = rows
                    .iter()
                    .filter(|r| r.g0 == g && r.m == m)
                    .max_by(|a, b| a.gamma.total_cmp(&b.gamma))
                    .unwrap();
                assert_eq!(best.delta, 0.0);
            }
        }
    }

    #[test]
    fn order_independent_of_execution() {
        let cfg = config("");
        let a = sweep(&cfg, Execution::Sequential).unwrap();
        let b = sweep(&cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].index + 1 == w[1].index));
    }

    #[test]
    fn cap_refuses_large_grids() {
        let err = sweep(&config("max_points = 10\n"), Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::GridTooLarge { points: 165, cap: 10, .. }));
    }

    #[test]
    fn lindblad_column() {
        let cfg = parse_config(
            "[system]\ngamma0 = 1\n[run.sweep]\ndelta = [0, 1, 3]\ng0 = [1]\nm = [3]\nlindblad = true\n",
        )
        .unwrap();
        let rows = sweep(&cfg, Execution::Parallel).unwrap();
        for r in &rows {
            assert!(r.lindblad_rel_error.unwrap() < 1e-2);
        }
        let (header, body) = sweep_table(&rows, true);
        assert_eq!(header.len(), body[0].len());
    }
}
