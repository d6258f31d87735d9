//! Closed-form scalars of the driven-atom model.
//!
//! Everything here is a pure function in natural units (hbar = 1, angular
//! frequencies). Degenerate inputs return errors instead of silent zeros.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{C64, I};

/// Mixing coefficients of the Jaynes-Cummings dressed states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DressedCoeffs {
    pub u_plus: f64,
    pub u_minus: f64,
    /// Off-resonant Rabi frequency, half the Autler-Townes splitting.
    pub omega: f64,
    pub delta: f64,
}

impl DressedCoeffs {
    /// `u+ u-`, equal to `g0 sqrt(m+1) / (2 Omega)`.
    pub fn product(&self) -> f64 {
        self.u_plus * self.u_minus
    }
}

/// Mixing of the dressed states by the vibronic coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DoublyDressedCoeffs {
    pub v_plus: f64,
    pub v_minus: f64,
    pub omega1: f64,
    pub omega_prime: f64,
    /// Weight of the upper doubly dressed state in the switched-on state.
    pub v1: f64,
    /// Weight of the lower doubly dressed state in the switched-on state.
    pub v2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayParams {
    /// Relaxation rate between the dressed states.
    pub gamma: f64,
    pub gamma0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBalance {
    /// `|2 Omega (u+^2 - u-^2) - delta|`, zero up to rounding.
    pub identity_residual: f64,
    /// Kinetic energy change per atom after full equilibration.
    pub de_kin: f64,
    pub sign: i8,
}

/// Dressed-basis force matrix elements and the two frequency shifts built
/// from them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InteractionCoeffs {
    pub f1: [[f64; 2]; 2],
    pub f2: [[f64; 2]; 2],
    /// Rabi frequency corrected by the diagonal force difference.
    pub omega_shifted: f64,
    /// Mean diagonal shift entering the doubly dressed mixing.
    pub omega_prime: f64,
}

/// `Omega = sqrt(delta^2 + 4 g0^2 (m+1)) / 2`.
pub fn rabi(delta: f64, g0: f64, m: u32) -> Result<f64> {
    if g0 < 0.0 || !g0.is_finite() {
        return Err(Error::param("g0", format!("must be finite and >= 0, got {g0}")));
    }
    if !delta.is_finite() {
        return Err(Error::param("delta", "must be finite"));
    }
    if delta == 0.0 && g0 == 0.0 {
        return Err(Error::Degenerate(
            "delta = 0 and g0 = 0 give zero dressed-state splitting".into(),
        ));
    }
    Ok(0.5 * (delta * delta + 4.0 * g0 * g0 * (m as f64 + 1.0)).sqrt())
}

pub fn dressed_coeffs(delta: f64, g0: f64, m: u32) -> Result<DressedCoeffs> {
    let omega = rabi(delta, g0, m)?;
    let ratio = (delta / (2.0 * omega)).clamp(-1.0, 1.0);
    Ok(DressedCoeffs {
        u_plus: (0.5 * (1.0 + ratio)).sqrt(),
        u_minus: (0.5 * (1.0 - ratio)).sqrt(),
        omega,
        delta,
    })
}

/// Doubly dressed mixing for a shift `omega_prime` and vibronic coupling
/// `omega_v`; the state weights `v1`, `v2` use the dressed coefficients.
pub fn dds_coeffs(
    omega_prime: f64,
    omega_v: f64,
    dressed: &DressedCoeffs,
) -> Result<DoublyDressedCoeffs> {
    if omega_prime == 0.0 && omega_v == 0.0 {
        return Err(Error::Degenerate(
            "omega_prime = 0 and omega_v = 0 leave the dressed states unmixed and degenerate".into(),
        ));
    }
    let omega1 = omega_prime.hypot(omega_v);
    let ratio = (omega_prime / (2.0 * omega1)).clamp(-0.5, 0.5);
    let v_plus = (0.5 + ratio).sqrt();
    let v_minus = (0.5 - ratio).sqrt();
    let (up, um) = (dressed.u_plus, dressed.u_minus);
    Ok(DoublyDressedCoeffs {
        v_plus,
        v_minus,
        omega1,
        omega_prime,
        v1: (um * v_plus + up * v_minus) / std::f64::consts::SQRT_2,
        v2: (up * v_plus - um * v_minus) / std::f64::consts::SQRT_2,
    })
}

/// Force matrix elements in the dressed basis from bare-state derivatives
/// `w1`, `w2` of the electron-nucleus interaction, plus the derived shifts
/// at displacement `dr`.
pub fn interaction_coeffs(
    w1: [[f64; 2]; 2],
    w2: [[f64; 2]; 2],
    dressed: &DressedCoeffs,
    dr: f64,
) -> InteractionCoeffs {
    let (up2, um2) = (dressed.u_plus.powi(2), dressed.u_minus.powi(2));
    let project = |w: [[f64; 2]; 2]| {
        let f11 = up2 * w[0][0] + um2 * w[1][1];
        let f22 = um2 * w[0][0] + up2 * w[1][1];
        let f12 = dressed.product() * (w[1][1] - w[0][0]);
        [[f11, f12], [f12, f22]]
    };
    let f1 = project(w1);
    let f2 = project(w2);
    InteractionCoeffs {
        f1,
        f2,
        omega_shifted: dressed.omega
            - dr / 2.0 * (f1[1][1] - f1[0][0])
            - dr * dr / 4.0 * (f2[1][1] - f2[0][0]),
        omega_prime: dr * (f1[0][0] + f1[1][1]) + 0.5 * dr * dr * (f2[0][0] + f2[1][1]),
    }
}

/// Zero-point amplitude of the centre-of-mass vibration, `sqrt(1 / (4 Omega M))`.
pub fn displacement_amplitude(omega: f64, mass: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::param("omega", format!("must be > 0, got {omega}")));
    }
    if !(mass > 0.0) {
        return Err(Error::param("mass", format!("must be > 0, got {mass}")));
    }
    Ok((0.25 / (omega * mass)).sqrt())
}

/// Vibronic coupling `|dR F12|`; the sign is absorbed into the basis phase.
pub fn vibronic_coupling(dr: f64, f12: f64) -> f64 {
    (dr * f12).abs()
}

/// Dressed-basis decay rate. Uses the single-manifold coefficients
/// (`u+(m) u-(m') ~ u+(m) u-(m)` for intense fields).
pub fn decay_rate(delta: f64, g0: f64, m: u32, gamma0: f64) -> Result<DecayParams> {
    if !(gamma0 >= 0.0) {
        return Err(Error::param("gamma0", format!("must be >= 0, got {gamma0}")));
    }
    if g0 == 0.0 {
        return Ok(DecayParams { gamma: 0.0, gamma0 });
    }
    let d = dressed_coeffs(delta, g0, m)?;
    Ok(DecayParams {
        gamma: d.product().powi(2) * gamma0 / 2.0,
        gamma0,
    })
}

/// The rational form of [`decay_rate`], kept as a second route.
pub fn decay_rate_rational(delta: f64, g0: f64, m: u32, gamma0: f64) -> f64 {
    let g2 = g0 * g0 * (m as f64 + 1.0);
    if g2 == 0.0 {
        return 0.0;
    }
    g2 / (delta * delta + 4.0 * g2) * gamma0 / 2.0
}

/// Population difference between the dressed states, relaxing at `2 gamma`.
pub fn population_difference(t: f64, gamma: f64, initial_diff: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::param("t", format!("must be >= 0, got {t}")));
    }
    Ok(initial_diff * (-2.0 * gamma * t).exp())
}

/// Energy bookkeeping after the dressed populations equilibrate.
///
/// The initial dressed population difference `delta / 2 Omega` relaxes to
/// zero across the splitting `2 Omega`; half the difference moves, so the
/// electron gains `delta / 2` and the centre of mass loses it.
pub fn energy_balance(delta: f64, g0: f64, m: u32) -> Result<EnergyBalance> {
    let d = dressed_coeffs(delta, g0, m)?;
    let residual = (2.0 * d.omega * (d.u_plus.powi(2) - d.u_minus.powi(2)) - delta).abs();
    let sign = if delta > 0.0 {
        -1
    } else if delta < 0.0 {
        1
    } else {
        0
    };
    Ok(EnergyBalance {
        identity_residual: residual,
        de_kin: -delta / 2.0,
        sign,
    })
}

/// Time envelopes of the system-reservoir matrix elements between doubly
/// dressed states: `(2 u+ u- i sin(theta), 2 u+ u- cos(theta))` with
/// `theta = 2 Omega_v sqrt(2n+1) t`.
pub fn envelope_matrix_elements(
    t: f64,
    omega_v: f64,
    n: u32,
    coeffs: &DressedCoeffs,
) -> (C64, f64) {
    let amp = 2.0 * coeffs.product();
    let theta = 2.0 * omega_v * (2.0 * n as f64 + 1.0).sqrt() * t;
    (I * (amp * theta.sin()), amp * theta.cos())
}
