//! Time evolution, projections and estimators.
//!
//! Closed systems use the exact eigen propagator. Open systems integrate the
//! Lindblad equation with a fixed-step RK4 scheme, checked by step doubling.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::Serialize;

use crate::analytics;
use crate::error::{Error, Result};
use crate::hilbert::{self, DensityOp, Operator, ProductSpace, QuantumState, StateRef, PHOTON, TLS};
use crate::linalg::{self, c, CMatrix, CVector, C64, I};
use crate::models::{BasisSet, SystemParams};

const NORM_TOL: f64 = 1e-10;
const LEAKAGE_TOL: f64 = 1e-6;
const TRACE_TOL: f64 = 1e-8;
const POSITIVITY_TOL: f64 = -1e-6;
const STEP_DOUBLING_TOL: f64 = 1e-6;
const POPULATION_SLACK: f64 = 1e-8;
const POPULATION_SUM_TOL: f64 = 1e-6;
const FIT_FLOOR: f64 = 1e-6;
const MIN_SPECTRAL_SAMPLES: usize = 64;
const MIN_PERIODS: f64 = 3.0;
const MIN_FIT_SAMPLES: usize = 8;
const ZERO_PAD: usize = 8;

/// Sampled channels on a shared, strictly increasing time grid.
#[derive(Clone, Debug, Default, Serialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub channels: Vec<(String, Vec<f64>)>,
    pub meta: BTreeMap<String, f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        check_times(&times)?;
        Ok(Self {
            times,
            ..Self::default()
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::Dimension {
                expected: self.times.len(),
                got: values.len(),
            });
        }
        self.channels.push((name.into(), values));
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }

    /// Check that the named channels are populations that sum to one.
    pub fn check_populations(&self, names: &[&str]) -> Result<()> {
        let cols: Vec<&[f64]> = names.iter().map(|n| self.channel(n)).collect::<Result<_>>()?;
        for (i, &t) in self.times.iter().enumerate() {
            let mut sum = 0.0;
            for (col, name) in cols.iter().zip(names) {
                let p = col[i];
                if !(-POPULATION_SLACK..=1.0 + POPULATION_SLACK).contains(&p) {
                    return Err(Error::InvalidDensity(format!(
                        "population `{name}` = {p} at t = {t}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > POPULATION_SUM_TOL {
                return Err(Error::InvalidDensity(format!(
                    "populations sum to {sum} at t = {t}"
                )));
            }
        }
        Ok(())
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::param("times", "empty time grid"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::param("times", "non-finite sample time"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("times", "must be strictly increasing"));
    }
    Ok(())
}

/// `n` evenly spaced samples on `[0, t_max]`.
pub fn linspace(t_max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub value: f64,
    pub stderr: f64,
    pub residual_rms: f64,
    pub window: (f64, f64),
}

/// A trajectory: the sampled states plus scalar diagnostics.
#[derive(Clone, Debug)]
pub struct Evolution<S> {
    pub series: TimeSeries,
    pub states: Vec<S>,
}

fn ensure_hermitian(h: &Operator) -> Result<()> {
    if h.is_hermitian() {
        return Ok(());
    }
    let residual = linalg::hermiticity_residual(h.matrix());
    if residual >= 1e-12 {
        return Err(Error::NotHermitian { residual });
    }
    Ok(())
}

fn leakage_guard<'a>(state: impl Into<StateRef<'a>>, time: f64) -> Result<()> {
    for (factor, population) in hilbert::top_level_populations(state) {
        if population > LEAKAGE_TOL {
            return Err(Error::Truncation {
                factor,
                population,
                time,
            });
        }
    }
    Ok(())
}

/// `psi(t) = exp(-iHt) psi0` at every sample time.
///
/// Channels: `norm` and `energy`.
pub fn evolve_state(h: &Operator, psi0: &QuantumState, times: &[f64]) -> Result<Evolution<QuantumState>> {
    ensure_hermitian(h)?;
    h.space().ensure_same(psi0.space())?;
    let mut series = TimeSeries::new(times.to_vec())?;
    let (values, vectors) = linalg::hermitian_eigen(h.matrix());
    let coeffs = vectors.adjoint() * psi0.amplitudes();
    let space = psi0.space().clone();

    let mut states = Vec::with_capacity(times.len());
    let mut norms = Vec::with_capacity(times.len());
    let mut energies = Vec::with_capacity(times.len());
    for &t in times {
        let phased = CVector::from_iterator(
            values.len(),
            values
                .iter()
                .zip(coeffs.iter())
                .map(|(&w, &a)| a * C64::from_polar(1.0, -w * t)),
        );
        let amps = &vectors * phased;
        let norm = amps.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        let energy = amps.dotc(&(h.matrix() * &amps)).re;
        let state = QuantumState::from_raw(space.clone(), amps);
        leakage_guard(&state, t)?;
        norms.push(norm);
        energies.push(energy);
        states.push(state);
    }
    series.push("norm", norms)?;
    series.push("energy", energies)?;
    Ok(Evolution { series, states })
}

struct Generator {
    h_eff: CMatrix,
    jumps: Vec<(f64, CMatrix, CMatrix)>,
}

impl Generator {
    /// `-i (H_eff rho - rho H_eff^dag) + sum_k r_k L_k rho L_k^dag`
    fn apply(&self, rho: &CMatrix) -> CMatrix {
        let left = &self.h_eff * rho;
        let mut out = (&left - left.adjoint()) * (-I);
        for (rate, l, ld) in &self.jumps {
            out += (l * rho * ld).scale(*rate);
        }
        out
    }

    fn rk4(&self, rho: &CMatrix, dt: f64) -> CMatrix {
        let k1 = self.apply(rho);
        let k2 = self.apply(&(rho + k1.scale(dt / 2.0)));
        let k3 = self.apply(&(rho + k2.scale(dt / 2.0)));
        let k4 = self.apply(&(rho + k3.scale(dt)));
        let mut next = rho + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
        // RK4 keeps hermiticity only to round-off; restore it exactly
        next = (&next + next.adjoint()).scale(0.5);
        next
    }

    fn advance(&self, rho: &CMatrix, span: f64, steps: usize) -> CMatrix {
        let dt = span / steps as f64;
        let mut out = rho.clone();
        for _ in 0..steps {
            out = self.rk4(&out, dt);
        }
        out
    }
}

fn operator_norm(m: &CMatrix) -> f64 {
    let herm = m.adjoint() * m;
    linalg::hermitian_eigen(&herm).0.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Lindblad evolution with jump operators `L_k` at rates `r_k`, from
/// `rho0` at `t = 0`.
///
/// The step obeys `dt <= 0.01 / w`, with `w` the largest of the Hamiltonian
/// eigenvalue spread and the total dissipative rate. Every sample is also
/// computed with half the step; a discrepancy above `1e-6` is a
/// [`Error::StepSize`] failure.
///
/// Channels: `trace`, `energy` and `min_eig`.
pub fn evolve_lindblad(
    h: &Operator,
    jump_ops: &[Operator],
    rates: &[f64],
    rho0: &DensityOp,
    times: &[f64],
) -> Result<Evolution<DensityOp>> {
    ensure_hermitian(h)?;
    h.space().ensure_same(rho0.space())?;
    if jump_ops.len() != rates.len() {
        return Err(Error::Dimension {
            expected: jump_ops.len(),
            got: rates.len(),
        });
    }
    for (op, &r) in jump_ops.iter().zip(rates) {
        h.space().ensure_same(op.space())?;
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::param("rates", format!("rate {r} must be finite and >= 0")));
        }
    }
    let mut series = TimeSeries::new(times.to_vec())?;
    if times[0] < 0.0 {
        return Err(Error::param("times", "must start at t >= 0"));
    }

    let mut h_eff = h.matrix().clone();
    let mut dissipative = 0.0;
    let mut jumps = Vec::with_capacity(jump_ops.len());
    for (op, &r) in jump_ops.iter().zip(rates) {
        let l = op.matrix().clone();
        let ld = l.adjoint();
        h_eff -= (&ld * &l).scale(r / 2.0) * I;
        dissipative += r * operator_norm(&l).powi(2);
        jumps.push((r, l, ld));
    }
    let generator = Generator { h_eff, jumps };
    let (h_values, _) = linalg::hermitian_eigen(h.matrix());
    let spread = h_values.last().unwrap_or(&0.0) - h_values.first().unwrap_or(&0.0);
    let limit = spread.max(dissipative);
    let dt_max = if limit > 0.0 { 0.01 / limit } else { f64::INFINITY };

    let mut coarse = rho0.matrix().clone();
    let mut fine = coarse.clone();
    let mut last = 0.0;
    let space = rho0.space().clone();
    let mut states = Vec::with_capacity(times.len());
    let (mut traces, mut energies, mut min_eigs) = (Vec::new(), Vec::new(), Vec::new());
    for &t in times {
        let span = t - last;
        if span > 0.0 {
            let steps = ((span / dt_max).ceil() as usize).max(1);
            coarse = generator.advance(&coarse, span, steps);
            fine = generator.advance(&fine, span, 2 * steps);
        }
        last = t;
        let delta = fine
            .diagonal()
            .iter()
            .zip(coarse.diagonal().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(linalg::max_abs(&(&fine - &coarse)), f64::max);
        if delta > STEP_DOUBLING_TOL {
            return Err(Error::StepSize { delta, limit });
        }
        let trace = fine.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::TraceDrift {
                drift: trace - 1.0,
                time: t,
            });
        }
        let min_eig = linalg::min_hermitian_eigenvalue(&fine);
        if min_eig < POSITIVITY_TOL {
            return Err(Error::Positivity { min_eig, time: t });
        }
        let state = DensityOp::from_raw(space.clone(), fine.clone());
        leakage_guard(&state, t)?;
        traces.push(trace);
        energies.push((h.matrix() * &fine).trace().re);
        min_eigs.push(min_eig);
        states.push(state);
    }
    series.push("trace", traces)?;
    series.push("energy", energies)?;
    series.push("min_eig", min_eigs)?;
    Ok(Evolution { series, states })
}

/// Dressed two-level relaxation model: `H = Omega sz'` on a bare `tls`
/// space, with jump operators `sm'` and `sp'` both at rate `gamma`.
#[derive(Clone, Debug)]
pub struct DressedChannel {
    pub hamiltonian: Operator,
    pub jumps: Vec<Operator>,
    pub rates: Vec<f64>,
    pub gamma: f64,
}

pub fn dressed_channel(params: &SystemParams) -> Result<DressedChannel> {
    params.validate()?;
    let space = hilbert::make_space(&[(TLS, 2)])?;
    let ops = hilbert::tls_ops(&space)?;
    let omega = params.omega()?;
    let gamma = analytics::decay_rate(params.delta(), params.g0, params.m, params.gamma0)?.gamma;
    Ok(DressedChannel {
        hamiltonian: ops.sz.scaled(omega),
        jumps: vec![ops.sm, ops.sp],
        rates: vec![gamma, gamma],
        gamma,
    })
}

/// Closed-form solution of `d rho11/dt = -gamma rho11 + gamma rho22` and its
/// mirror. Channels: `rho11`, `rho22`, `diff`.
pub fn reduced_ds_relaxation(gamma: f64, rho0_diag: (f64, f64), times: &[f64]) -> Result<TimeSeries> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", "must be finite and >= 0"));
    }
    let (p1, p2) = rho0_diag;
    if (p1 + p2 - 1.0).abs() > POPULATION_SUM_TOL || p1 < 0.0 || p2 < 0.0 {
        return Err(Error::param("rho0_diag", "populations must be >= 0 and sum to 1"));
    }
    if times.iter().any(|&t| t < 0.0) {
        return Err(Error::param("times", "must be >= 0"));
    }
    let mut series = TimeSeries::new(times.to_vec())?;
    let diff: Vec<f64> = times
        .iter()
        .map(|&t| analytics::population_difference(t, gamma, p1 - p2))
        .collect::<Result<_>>()?;
    series.push("rho11", diff.iter().map(|d| 0.5 + d / 2.0).collect())?;
    series.push("rho22", diff.iter().map(|d| 0.5 - d / 2.0).collect())?;
    series.push("diff", diff)?;
    series.meta.insert("gamma".into(), gamma);
    Ok(series)
}

/// State kinds that can be projected onto a frame.
pub trait Projectable {
    fn space(&self) -> &ProductSpace;
    /// Diagonal of `frame^dag state frame`.
    fn frame_populations(&self, frame: &CMatrix) -> Vec<f64>;
}

impl Projectable for QuantumState {
    fn space(&self) -> &ProductSpace {
        QuantumState::space(self)
    }

    fn frame_populations(&self, frame: &CMatrix) -> Vec<f64> {
        (frame.adjoint() * self.amplitudes()).iter().map(|z| z.norm_sqr()).collect()
    }
}

impl Projectable for DensityOp {
    fn space(&self) -> &ProductSpace {
        DensityOp::space(self)
    }

    fn frame_populations(&self, frame: &CMatrix) -> Vec<f64> {
        let rotated = frame.adjoint() * self.matrix() * frame;
        rotated.diagonal().iter().map(|z| z.re).collect()
    }
}

/// One channel per basis vector, named by the basis labels.
pub fn populations_in_basis<S: Projectable>(evolution: &Evolution<S>, basis: &BasisSet) -> Result<TimeSeries> {
    let mut series = TimeSeries::new(evolution.series.times.clone())?;
    let mut columns = vec![Vec::with_capacity(evolution.states.len()); basis.labels.len()];
    for state in &evolution.states {
        basis.space.ensure_same(state.space())?;
        for (col, p) in columns.iter_mut().zip(state.frame_populations(&basis.frame)) {
            col.push(p);
        }
    }
    for (label, col) in basis.labels.iter().zip(columns) {
        series.push(label.clone(), col)?;
    }
    let names: Vec<&str> = basis.labels.iter().map(String::as_str).collect();
    series.check_populations(&names)?;
    Ok(series)
}

/// Populations of the two `tls` levels, summed over every other factor.
/// Channels: `upper` (index 0) and `lower` (index 1).
pub fn tls_populations<S: Projectable>(evolution: &Evolution<S>) -> Result<TimeSeries> {
    let mut series = TimeSeries::new(evolution.series.times.clone())?;
    let mut upper = Vec::with_capacity(evolution.states.len());
    for state in &evolution.states {
        let space = state.space();
        let pos = space.position(TLS)?;
        let pops = state.frame_populations(&space.identity());
        upper.push(
            pops.iter()
                .enumerate()
                .filter(|(i, _)| space.digits(*i)[pos] == 0)
                .map(|(_, p)| p)
                .sum::<f64>(),
        );
    }
    let lower = upper.iter().map(|p| 1.0 - p).collect();
    series.push("upper", upper)?;
    series.push("lower", lower)?;
    Ok(series)
}

/// Bare ground state `|phi2, m+1>` (vibrational factor in its ground level),
/// the state just before a rectangular pulse switches on.
pub fn switch_on_state(params: &SystemParams, space: &ProductSpace) -> Result<QuantumState> {
    let mut levels = vec![(TLS, 1usize)];
    if space.factor_dim(PHOTON).unwrap_or(1) > 1 {
        levels.push((PHOTON, params.m as usize + 1));
    }
    QuantumState::basis(space, &levels)
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    let uneven = times
        .windows(2)
        .map(|w| ((w[1] - w[0]) - dt).abs())
        .fold(0.0, f64::max);
    if uneven > 1e-6 * dt {
        return Err(Error::param("times", "spectral estimation needs uniform sampling"));
    }
    Ok(dt)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Residual RMS of the least-squares fit `c0 + a cos(wt) + b sin(wt)`, and
/// the amplitude `sqrt(a^2 + b^2)`.
fn sinusoid_fit(times: &[f64], x: &[f64], w: f64) -> (f64, f64) {
    let n = times.len();
    let design = nalgebra::DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => (w * times[i]).cos(),
        _ => (w * times[i]).sin(),
    });
    let y = nalgebra::DVector::from_column_slice(x);
    let normal = design.transpose() * &design;
    let rhs = design.transpose() * &y;
    let coef = normal
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .unwrap_or_else(|| nalgebra::DVector::zeros(3));
    let resid = &y - &design * &coef;
    ((resid.norm_squared() / n as f64).sqrt(), coef[1].hypot(coef[2]))
}

/// Angular frequency of the strongest spectral line of a channel.
///
/// The mean is removed, a Hann taper applied and the record zero-padded
/// eight-fold before the transform; the peak bin is refined by a parabola
/// through the log-magnitudes of its neighbours.
pub fn dominant_frequency(series: &TimeSeries, channel: &str) -> Result<FitResult> {
    let values = series.channel(channel)?;
    let times = &series.times;
    let n = values.len();
    if n < MIN_SPECTRAL_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n,
            need: MIN_SPECTRAL_SAMPLES,
        });
    }
    let dt = uniform_step(times)?;
    let avg = mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - avg).collect();
    let rms = (centered.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms <= 1e-12 * (1.0 + avg.abs()) {
        return Err(Error::NoPeak);
    }

    let len = ZERO_PAD * n;
    let taper: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos()))
        .collect();
    let mut buf: Vec<C64> = vec![c(0.0); len];
    for i in 0..n {
        buf[i] = c(centered[i] * taper[i]);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mags: Vec<f64> = buf[..len / 2 + 1].iter().map(|z| z.norm()).collect();

    let (peak, &peak_mag) = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::NoPeak)?;
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[sorted.len() / 2];
    if peak_mag <= 10.0 * floor || peak == 0 || peak + 1 >= mags.len() {
        return Err(Error::NoPeak);
    }

    let ln = |k: usize| mags[k].max(f64::MIN_POSITIVE).ln();
    let (a, b, g) = (ln(peak - 1), ln(peak), ln(peak + 1));
    let curvature = a - 2.0 * b + g;
    let offset = if curvature < 0.0 { 0.5 * (a - g) / curvature } else { 0.0 };
    let bin = 2.0 * PI / (len as f64 * dt);
    let omega = (peak as f64 + offset) * bin;

    let span = times[n - 1] - times[0];
    let periods = omega * span / (2.0 * PI);
    if periods < MIN_PERIODS {
        return Err(Error::TooShort(format!(
            "{periods:.2} periods in the record, need at least {MIN_PERIODS}"
        )));
    }

    let (residual_rms, _) = sinusoid_fit(times, &centered, omega);
    // noise on each log-magnitude bin, propagated through the vertex formula
    let window_energy = taper.iter().map(|w| w * w).sum::<f64>().sqrt();
    let sigma_log = residual_rms * window_energy / peak_mag;
    let stderr = if curvature < 0.0 {
        bin * sigma_log / (2f64.sqrt() * curvature.abs())
    } else {
        bin
    };
    Ok(FitResult {
        value: omega,
        stderr,
        residual_rms,
        window: (times[0], times[n - 1]),
    })
}

/// Decay rate of a channel from a least-squares line through `ln |x|`.
///
/// The window starts at the first sample with `|x| > 1e-6` and runs while
/// the channel keeps that sign and stays above the floor.
pub fn fit_exponential(series: &TimeSeries, channel: &str) -> Result<FitResult> {
    let values = series.channel(channel)?;
    log_linear_fit(&series.times, values)
}

/// [`fit_exponential`] on a centred moving average over one `period`, to
/// remove a residual oscillation before the log fit.
pub fn fit_exponential_smoothed(series: &TimeSeries, channel: &str, period: f64) -> Result<FitResult> {
    if !(period > 0.0) {
        return Err(Error::param("period", "must be > 0"));
    }
    let values = series.channel(channel)?;
    let dt = uniform_step(&series.times)?;
    let half = ((period / dt / 2.0).round() as usize).max(1);
    let n = values.len();
    if n <= 2 * half {
        return Err(Error::TooFewSamples {
            got: n,
            need: 2 * half + MIN_FIT_SAMPLES,
        });
    }
    let mut times = Vec::with_capacity(n - 2 * half);
    let mut smooth = Vec::with_capacity(n - 2 * half);
    for i in half..n - half {
        times.push(series.times[i]);
        smooth.push(mean(&values[i - half..=i + half]));
    }
    log_linear_fit(&times, &smooth)
}

fn log_linear_fit(times: &[f64], values: &[f64]) -> Result<FitResult> {
    let start = values
        .iter()
        .position(|v| v.abs() > FIT_FLOOR)
        .ok_or(Error::TooFewSamples {
            got: 0,
            need: MIN_FIT_SAMPLES,
        })?;
    let sign = values[start].signum();
    let end = values[start..]
        .iter()
        .position(|&v| v * sign <= FIT_FLOOR)
        .map_or(values.len(), |k| start + k);
    if values[end..].iter().any(|&v| v * sign < -FIT_FLOOR) {
        return Err(Error::SignChange);
    }
    let count = end - start;
    if count < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            got: count,
            need: MIN_FIT_SAMPLES,
        });
    }

    let ts = &times[start..end];
    let ys: Vec<f64> = values[start..end].iter().map(|v| (v * sign).ln()).collect();
    let (tm, ym) = (mean(ts), mean(&ys));
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let ss: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum();
    Ok(FitResult {
        value: -slope,
        stderr: (ss / (count as f64 - 2.0) / sxx).sqrt(),
        residual_rms: (ss / count as f64).sqrt(),
        window: (ts[0], ts[count - 1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{expectation, make_space, PHOTON, VIB};
    use crate::models::{self, basis_set, BasisKind};
    use approx::assert_relative_eq;

    fn series_of(times: Vec<f64>, name: &str, values: Vec<f64>) -> TimeSeries {
        let mut s = TimeSeries::new(times).unwrap();
        s.push(name, values).unwrap();
        s
    }

    #[test]
    fn time_series_validation() {
        assert!(TimeSeries::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeSeries::new(vec![]).is_err());
        let mut s = TimeSeries::new(vec![0.0, 1.0]).unwrap();
        assert!(s.push("x", vec![1.0]).is_err());
        s.push("a", vec![0.5, 1.0]).unwrap();
        s.push("b", vec![0.5, 0.0]).unwrap();
        s.check_populations(&["a", "b"]).unwrap();
        assert!(s.check_populations(&["a"]).is_err());
        assert!(matches!(s.channel("zz"), Err(Error::UnknownChannel(_))));
    }

    #[test]
    fn stationary_state() {
        let s = make_space(&[(TLS, 2), (VIB, 3)]).unwrap();
        let h = Operator::hermitian(
            s.clone(),
            CMatrix::from_diagonal(&CVector::from_iterator(6, (0..6).map(|k| c(k as f64 * 0.3)))),
        )
        .unwrap();
        let psi = QuantumState::basis(&s, &[(TLS, 1), (VIB, 1)]).unwrap();
        let ev = evolve_state(&h, &psi, &linspace(10.0, 50)).unwrap();
        let basis = basis_set(&SystemParams::with_detuning(1.0, 1.0, 0), BasisKind::Bs, &s).unwrap();
        let pops = populations_in_basis(&ev, &basis).unwrap();
        let k = s.index_from_labels(&[(TLS, 1), (VIB, 1)]).unwrap();
        for (i, (_, col)) in pops.channels.iter().enumerate() {
            let want = if i == k { 1.0 } else { 0.0 };
            assert!(col.iter().all(|p| (p - want).abs() < 1e-14));
        }
    }

    #[test]
    fn rabi_law() {
        let s = make_space(&[(TLS, 2), (PHOTON, 1)]).unwrap();
        for (delta, g0, m) in [(0.0, 1.0, 0), (3.0, 1.0, 3), (-1.2, 0.4, 2)] {
            let p = SystemParams::with_detuning(delta, g0, m);
            let h = models::build_jc(&p, &s).unwrap();
            let times = linspace(20.0, 400);
            let ev = evolve_state(&h, &switch_on_state(&p, &s).unwrap(), &times).unwrap();
            let pops = tls_populations(&ev).unwrap();
            let omega = p.omega().unwrap();
            let amp = 4.0 * g0 * g0 * (m as f64 + 1.0) / (delta * delta + 4.0 * g0 * g0 * (m as f64 + 1.0));
            for (t, p1) in times.iter().zip(pops.channel("upper").unwrap()) {
                assert!((p1 - amp * (omega * t).sin().powi(2)).abs() < 1e-10);
            }
            let e = ev.series.channel("energy").unwrap();
            assert!(e.iter().all(|x| (x - e[0]).abs() < 1e-10));
        }
    }

    #[test]
    fn full_fock_matches_manifold() {
        let p = SystemParams {
            epsilon: 5.5,
            omega0: 5.0,
            g0: 0.3,
            m: 1,
            ..Default::default()
        };
        let big = make_space(&[(TLS, 2), (PHOTON, 5)]).unwrap();
        let small = make_space(&[(TLS, 2), (PHOTON, 1)]).unwrap();
        let times = linspace(15.0, 100);
        let a = evolve_state(&models::build_jc(&p, &big).unwrap(), &switch_on_state(&p, &big).unwrap(), &times).unwrap();
        let b = evolve_state(&models::build_jc(&p, &small).unwrap(), &switch_on_state(&p, &small).unwrap(), &times).unwrap();
        let pa = tls_populations(&a).unwrap();
        let pb = tls_populations(&b).unwrap();
        for (x, y) in pa.channel("upper").unwrap().iter().zip(pb.channel("upper").unwrap()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn leakage_is_reported() {
        let p = SystemParams {
            omega_v: 1.0,
            ..SystemParams::with_detuning(0.0, 1.0, 0)
        };
        let s = make_space(&[(TLS, 2), (PHOTON, 1), (VIB, 2)]).unwrap();
        let h = models::build_vibronic(&p, &s).unwrap();
        let psi = QuantumState::basis(&s, &[(TLS, 0), (VIB, 0)]).unwrap();
        let err = evolve_state(&h, &psi, &linspace(5.0, 50)).unwrap_err();
        assert!(matches!(err, Error::Truncation { ref factor, .. } if factor == VIB));
    }

    #[test]
    fn rejects_non_hermitian() {
        let s = make_space(&[(TLS, 2)]).unwrap();
        let h = Operator::new(s.clone(), CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)])).unwrap();
        let psi = QuantumState::basis(&s, &[(TLS, 0)]).unwrap();
        assert!(matches!(evolve_state(&h, &psi, &[0.0, 1.0]), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn switch_on_populations() {
        let s = make_space(&[(TLS, 2), (PHOTON, 1), (VIB, 3)]).unwrap();
        for delta in [3.0, -2.0, 0.0] {
            let p = SystemParams::with_detuning(delta, 1.0, 3);
            let d = p.dressed().unwrap();
            let ev = evolve_state(&models::build_jc(&p, &s).unwrap(), &switch_on_state(&p, &s).unwrap(), &[0.0]).unwrap();
            let pops = populations_in_basis(&ev, &basis_set(&p, BasisKind::Ds, &s).unwrap()).unwrap();
            assert_relative_eq!(pops.channel("xi1_n0").unwrap()[0], d.u_minus.powi(2), epsilon = 1e-12);
            assert_relative_eq!(pops.channel("xi2_n0").unwrap()[0], d.u_plus.powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn vibronic_frequency_and_parity() {
        let p = SystemParams {
            omega_v: 1.0,
            ..SystemParams::with_detuning(0.0, 1.0, 0)
        };
        let s = make_space(&[(TLS, 2), (PHOTON, 1), (VIB, 12)]).unwrap();
        let h = models::build_vibronic(&p, &s).unwrap();
        let psi = QuantumState::basis(&s, &[(TLS, 0), (VIB, 2)]).unwrap();
        let times = linspace(60.0, 2048);
        let ev = evolve_state(&h, &psi, &times).unwrap();
        let pops = tls_populations(&ev).unwrap();
        let f = dominant_frequency(&pops, "upper").unwrap();
        assert_relative_eq!(f.value, 2.0 * 3f64.sqrt(), max_relative = 5e-3);
        let pi = models::parity_op(&s).unwrap();
        let first = expectation(&pi, &ev.states[0]).unwrap().re;
        for st in &ev.states {
            assert!((expectation(&pi, st).unwrap().re - first).abs() < 1e-8);
        }
        let pos = populations_in_basis(&ev, &basis_set(&p, BasisKind::Pos, &s).unwrap()).unwrap();
        for (_, col) in &pos.channels {
            assert!(col.iter().all(|x| (x - col[0]).abs() < 1e-8));
        }
    }

    #[test]
    fn lindblad_closed_limit_matches_unitary() {
        let p = SystemParams::with_detuning(0.7, 0.5, 1);
        let s = make_space(&[(TLS, 2), (PHOTON, 1)]).unwrap();
        let h = models::build_jc(&p, &s).unwrap();
        let psi = switch_on_state(&p, &s).unwrap();
        let times = linspace(8.0, 41);
        let pure = evolve_state(&h, &psi, &times).unwrap();
        let mixed = evolve_lindblad(&h, &[], &[], &DensityOp::pure(&psi), &times).unwrap();
        for (a, b) in pure.states.iter().zip(&mixed.states) {
            let proj = DensityOp::pure(a);
            assert!(linalg::max_abs(&(proj.matrix() - b.matrix())) < 1e-8);
        }
    }

    #[test]
    fn lindblad_dressed_relaxation() {
        for delta in [0.0, 1.0, 3.0] {
            let p = SystemParams {
                gamma0: 1.0,
                ..SystemParams::with_detuning(delta, 1.0, 3)
            };
            let ch = dressed_channel(&p).unwrap();
            let rho0 = DensityOp::new(
                ch.hamiltonian.space().clone(),
                CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(0.0)])),
            )
            .unwrap();
            let times = linspace(3.0 / ch.gamma, 300);
            let ev = evolve_lindblad(&ch.hamiltonian, &ch.jumps, &ch.rates, &rho0, &times).unwrap();
            let pops = tls_populations(&ev).unwrap();
            let diff: Vec<f64> = pops
                .channel("upper")
                .unwrap()
                .iter()
                .zip(pops.channel("lower").unwrap())
                .map(|(a, b)| a - b)
                .collect();
            let series = series_of(times.clone(), "diff", diff.clone());
            let fit = fit_exponential(&series, "diff").unwrap();
            assert_relative_eq!(fit.value, 2.0 * ch.gamma, max_relative = 1e-6);
            let closed = reduced_ds_relaxation(ch.gamma, (1.0, 0.0), &times).unwrap();
            for (x, y) in diff.iter().zip(closed.channel("diff").unwrap()) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lindblad_rejects_bad_inputs() {
        let s = make_space(&[(TLS, 2)]).unwrap();
        let ops = hilbert::tls_ops(&s).unwrap();
        let rho = DensityOp::new(s.clone(), s.identity().scale(0.5)).unwrap();
        assert!(evolve_lindblad(&ops.sz, std::slice::from_ref(&ops.sm), &[-1.0], &rho, &[0.0, 1.0]).is_err());
        assert!(evolve_lindblad(&ops.sz, std::slice::from_ref(&ops.sm), &[], &rho, &[0.0, 1.0]).is_err());
        let other = make_space(&[(TLS, 2), (VIB, 2)]).unwrap();
        let rho2 = DensityOp::new(other.clone(), other.identity().scale(0.25)).unwrap();
        assert!(matches!(
            evolve_lindblad(&ops.sz, &[], &[], &rho2, &[0.0]),
            Err(Error::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn relaxation_closed_form() {
        let times = linspace(10.0, 11);
        let s = reduced_ds_relaxation(0.4, (0.5, 0.5), &times).unwrap();
        assert!(s.channel("rho11").unwrap().iter().all(|p| (p - 0.5).abs() < 1e-15));
        let s = reduced_ds_relaxation(0.5, (0.8, 0.2), &[0.0, 1.0, 200.0]).unwrap();
        let d = s.channel("diff").unwrap();
        assert_relative_eq!(d[1], 0.6 / std::f64::consts::E, epsilon = 1e-15);
        assert!((s.channel("rho11").unwrap()[2] - 0.5).abs() < 1e-15);
        s.check_populations(&["rho11", "rho22"]).unwrap();
        assert!(reduced_ds_relaxation(-1.0, (1.0, 0.0), &[0.0]).is_err());
        assert!(reduced_ds_relaxation(1.0, (0.7, 0.7), &[0.0]).is_err());
    }

    #[test]
    fn frequency_of_squared_sine() {
        let times = linspace(40.0, 1000);
        let w = 1.3;
        let s = series_of(times.clone(), "p", times.iter().map(|t| (w * t).sin().powi(2)).collect());
        let f = dominant_frequency(&s, "p").unwrap();
        assert_relative_eq!(f.value, 2.0 * w, max_relative = 5e-3);
        assert!(f.residual_rms < 1e-3 && f.stderr >= 0.0);
    }

    #[test]
    fn frequency_errors() {
        let times = linspace(40.0, 1000);
        let flat = series_of(times.clone(), "p", vec![0.3; 1000]);
        assert!(matches!(dominant_frequency(&flat, "p"), Err(Error::NoPeak)));
        let short = series_of(linspace(1.0, 32), "p", (0..32).map(|i| (i as f64).sin()).collect());
        assert!(matches!(dominant_frequency(&short, "p"), Err(Error::TooFewSamples { .. })));
        let slow = series_of(times.clone(), "p", times.iter().map(|t| (0.3 * t).cos()).collect());
        assert!(matches!(dominant_frequency(&slow, "p"), Err(Error::TooShort(_))));
    }

    #[test]
    fn exponential_fits() {
        let times = linspace(10.0, 200);
        let s = series_of(times.clone(), "x", times.iter().map(|t| 0.7 * (-0.45 * t).exp()).collect());
        let f = fit_exponential(&s, "x").unwrap();
        assert_relative_eq!(f.value, 0.45, max_relative = 1e-10);
        let neg = series_of(times.clone(), "x", times.iter().map(|t| -(-0.45 * t).exp()).collect());
        assert_relative_eq!(fit_exponential(&neg, "x").unwrap().value, 0.45, max_relative = 1e-10);
        let osc = series_of(times.clone(), "x", times.iter().map(|t| (2.0 * t).sin()).collect());
        assert!(matches!(fit_exponential(&osc, "x"), Err(Error::SignChange)));
        let tiny = series_of(times.clone(), "x", vec![1e-9; 200]);
        assert!(matches!(fit_exponential(&tiny, "x"), Err(Error::TooFewSamples { .. })));
        let rippled = series_of(
            times.clone(),
            "x",
            times
                .iter()
                .map(|t| (-0.3 * t).exp() * (1.0 + 0.02 * (2.0 * PI * t).cos()))
                .collect(),
        );
        let f = fit_exponential_smoothed(&rippled, "x", 1.0).unwrap();
        assert_relative_eq!(f.value, 0.3, max_relative = 1e-2);
    }
}
