//! Hamiltonians, conserved operators and basis frames of the driven atom.
//!
//! Two coordinate systems are in play. [`build_jc`] acts on the bare
//! two-level states: `tls` index 0 is the excited state `|phi1>` and index 1
//! the ground state `|phi2>`; with a one-dimensional photon factor the pair is
//! `{|phi1, m>, |phi2, m+1>}`. [`build_vibronic`], [`parity_op`] and
//! [`displacement_op`] act on the dressed states instead: `tls` index 0 is the
//! upper dressed state `|xi1>` (energy `+Omega`), index 1 the lower one
//! `|xi2>` (energy `-Omega`).
//!
//! In the dressed coordinates the coupling pairs `|xi1, k>` with
//! `|xi2, k+1>`; those pairs are the doubly dressed and parity doublets.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, DressedCoeffs};
use crate::error::{Error, Result};
use crate::hilbert::{self, Operator, ProductSpace, PHOTON, TLS, VIB};
use crate::linalg::{self, c, CMatrix};

/// Physical scalars of the model in natural units (hbar = 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Transition energy (equal to the transition angular frequency).
    pub epsilon: f64,
    /// Drive angular frequency.
    pub omega0: f64,
    pub g0: f64,
    /// Photon number of the manifold.
    pub m: u32,
    pub gamma0: f64,
    /// Vibronic coupling strength.
    pub omega_v: f64,
    pub mass: f64,
    /// First-derivative force matrix elements in the dressed basis.
    pub f1: [[f64; 2]; 2],
    /// Second-derivative force matrix elements in the dressed basis.
    pub f2: [[f64; 2]; 2],
    pub n_vib: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            omega0: 0.0,
            g0: 1.0,
            m: 0,
            gamma0: 0.0,
            omega_v: 0.0,
            mass: 1.0,
            f1: [[0.0; 2]; 2],
            f2: [[0.0; 2]; 2],
            n_vib: 40,
        }
    }
}

impl SystemParams {
    /// Parameters with the given detuning; the drive frequency is zero, which
    /// only shifts every energy by a constant.
    pub fn with_detuning(delta: f64, g0: f64, m: u32) -> Self {
        Self {
            epsilon: delta,
            g0,
            m,
            ..Self::default()
        }
    }

    pub fn delta(&self) -> f64 {
        self.epsilon - self.omega0
    }

    pub fn omega(&self) -> Result<f64> {
        analytics::rabi(self.delta(), self.g0, self.m)
    }

    pub fn dressed(&self) -> Result<DressedCoeffs> {
        analytics::dressed_coeffs(self.delta(), self.g0, self.m)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.epsilon, self.omega0, self.g0, self.gamma0, self.omega_v, self.mass];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("params", "all scalars must be finite"));
        }
        if self.g0 < 0.0 {
            return Err(Error::param("g0", "must be >= 0"));
        }
        if self.gamma0 < 0.0 {
            return Err(Error::param("gamma0", "must be >= 0"));
        }
        if self.omega_v < 0.0 {
            return Err(Error::param("omega_v", "must be >= 0"));
        }
        if !(self.mass > 0.0) {
            return Err(Error::param("mass", "must be > 0"));
        }
        for (name, f) in [("f1", &self.f1), ("f2", &self.f2)] {
            if (f[0][1] - f[1][0]).abs() > 1e-12 * (1.0 + f[0][1].abs()) {
                return Err(Error::param(name, "must be symmetric"));
            }
        }
        if self.n_vib == 0 {
            return Err(Error::param("n_vib", "must be >= 1"));
        }
        Ok(())
    }
}

fn photon_dim(space: &ProductSpace) -> usize {
    space.factor_dim(PHOTON).unwrap_or(1)
}

/// Jaynes-Cummings Hamiltonian in the bare basis.
///
/// With a one-dimensional (or absent) photon factor the two-level factor
/// stands for the pair `{|phi1, m>, |phi2, m+1>}`; otherwise the photon
/// factor is a truncated Fock space and must hold level `m + 1`.
pub fn build_jc(params: &SystemParams, space: &ProductSpace) -> Result<Operator> {
    params.validate()?;
    let eps = params.epsilon;
    let w = params.omega0;
    let g = params.g0;
    let ph = photon_dim(space);
    let matrix = if ph == 1 {
        let m = params.m as f64;
        let block = CMatrix::from_row_slice(
            2,
            2,
            &[
                c(eps / 2.0 + w * (m + 0.5)),
                c(-g * (m + 1.0).sqrt()),
                c(-g * (m + 1.0).sqrt()),
                c(-eps / 2.0 + w * (m + 1.5)),
            ],
        );
        space.embed(TLS, &block)?
    } else {
        if ph < params.m as usize + 2 {
            return Err(Error::InvalidSpace(format!(
                "photon factor dim {ph} cannot hold level m + 1 = {}",
                params.m + 1
            )));
        }
        let ops = hilbert::tls_ops(space)?;
        let (cl, cr) = hilbert::ladder_ops(space, PHOTON)?;
        let n_ph = cr.dot(&cl)?;
        let sz = ops.sz.matrix();
        let id = space.identity();
        let coupling = ops.sp.dot(&cl)?.add(&cr.dot(&ops.sm)?)?;
        sz.scale(eps / 2.0) + (n_ph.matrix() + id.scale(0.5)).scale(w) - coupling.matrix().scale(g)
    };
    Operator::hermitian(space.clone(), matrix)
}

/// Excitation number `c^dag c + (sz + 1) / 2`; in the fixed-manifold layout
/// the photon number is the constant `m` for `|phi1>` and `m + 1` for `|phi2>`.
pub fn excitation_number(params: &SystemParams, space: &ProductSpace) -> Result<Operator> {
    let ops = hilbert::tls_ops(space)?;
    let upper = (ops.sz.matrix() + space.identity()).scale(0.5);
    let photons = if photon_dim(space) == 1 {
        let m = params.m as f64;
        let local = CMatrix::from_row_slice(2, 2, &[c(m), c(0.0), c(0.0), c(m + 1.0)]);
        space.embed(TLS, &local)?
    } else {
        hilbert::number_op(space, PHOTON)?.into_matrix()
    };
    Operator::hermitian(space.clone(), photons + upper)
}

fn require_vibronic_space(space: &ProductSpace) -> Result<usize> {
    if photon_dim(space) != 1 {
        return Err(Error::InvalidSpace(
            "vibronic operators work inside one photon manifold (photon dim must be 1)".into(),
        ));
    }
    let n = space.factor_dim(VIB)?;
    if n < 2 {
        return Err(Error::param("n_vib", format!("must be >= 2, got {n}")));
    }
    Ok(n)
}

/// Dressed-basis vibronic Hamiltonian
/// `Omega sz' + omega0 (m + 1) + 2 Omega_v (a^dag a + 1/2) + Omega_v (a^dag sm' + sp' a)`.
pub fn build_vibronic(params: &SystemParams, space: &ProductSpace) -> Result<Operator> {
    params.validate()?;
    require_vibronic_space(space)?;
    let omega = params.omega()?;
    let wv = params.omega_v;
    let ops = hilbert::tls_ops(space)?;
    let (a, ad) = hilbert::ladder_ops(space, VIB)?;
    let id = space.identity();
    let photon = params.omega0 * (params.m as f64 + 1.0);
    let exchange = ad.dot(&ops.sm)?.add(&ops.sp.dot(&a)?)?;
    let matrix = ops.sz.matrix().scale(omega)
        + id.scale(photon)
        + (ad.dot(&a)?.matrix() + id.scale(0.5)).scale(2.0 * wv)
        + exchange.matrix().scale(wv);
    Operator::hermitian(space.clone(), matrix)
}

/// Parity `-sz' (-1)^(a^dag a)`.
pub fn parity_op(space: &ProductSpace) -> Result<Operator> {
    let n = space.factor_dim(VIB)?;
    let ops = hilbert::tls_ops(space)?;
    let local = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c(if i % 2 == 0 { 1.0 } else { -1.0 })
        } else {
            c(0.0)
        }
    });
    let phase = space.embed(VIB, &local)?;
    Operator::hermitian(space.clone(), -(ops.sz.matrix() * phase))
}

/// `exp(i Omega_v t (a^dag sm' + sp' a))` in the dressed coordinates.
pub fn displacement_op(omega_v: f64, t: f64, space: &ProductSpace) -> Result<Operator> {
    if !t.is_finite() || !omega_v.is_finite() {
        return Err(Error::param("t", "time and coupling must be finite"));
    }
    let ops = hilbert::tls_ops(space)?;
    let (a, ad) = hilbert::ladder_ops(space, VIB)?;
    let generator = ad.dot(&ops.sm)?.add(&ops.sp.dot(&a)?)?;
    let (values, vectors) = linalg::hermitian_eigen(generator.matrix());
    Operator::new(space.clone(), linalg::phase_exp(&values, &vectors, omega_v * t))
}

/// Adiabatic potential coefficients `(sz, s0)` at displacement `dr`, to
/// second order.
///
/// The `sz` part is the Taylor expansion of `sqrt(Omega^2 + (dr F12)^2)`,
/// `Omega + dr^2 F12^2 / (2 Omega)`, whose curvature `F12^2 / Omega` is the
/// electronic spring constant used by [`oscillator_solution`]. The `s0` part
/// uses the mean of the two diagonal force elements.
pub fn adiabatic_potential(params: &SystemParams, dr: f64) -> Result<(f64, f64)> {
    let omega = params.omega()?;
    if omega <= 0.0 {
        return Err(Error::Degenerate("zero Rabi splitting".into()));
    }
    let f12 = params.f1[0][1];
    let mean1 = 0.5 * (params.f1[0][0] + params.f1[1][1]);
    let mean2 = 0.5 * (params.f2[0][0] + params.f2[1][1]);
    Ok((
        omega + dr * dr * f12 * f12 / (2.0 * omega),
        dr * mean1 + 0.5 * dr * dr * mean2,
    ))
}

/// Displaced harmonic wells of the centre of mass on the two dressed branches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OscillatorSolution {
    /// Well frequencies for branches j = 1, 2.
    pub freq: [f64; 2],
    /// Well displacements `F_jj / (M w_j^2)`.
    pub shift: [f64; 2],
    /// Ground-state energy shift `-shift_j F_jj / 2` from the linear force.
    pub energy_offset: [f64; 2],
}

fn spring_constants(params: &SystemParams, omega: f64) -> [f64; 2] {
    let base = params.f1[0][1].powi(2) / omega;
    // j = 1 adds F2_11, j = 2 subtracts F2_22
    [base + params.f2[0][0], base - params.f2[1][1]]
}

pub fn oscillator_solution(params: &SystemParams) -> Result<OscillatorSolution> {
    params.validate()?;
    let omega = params.omega()?;
    let springs = spring_constants(params, omega);
    let mut out = OscillatorSolution {
        freq: [0.0; 2],
        shift: [0.0; 2],
        energy_offset: [0.0; 2],
    };
    for j in 0..2 {
        let k = springs[j];
        if !(k > 0.0) {
            return Err(Error::UnstableBranch {
                branch: j + 1,
                spring: k,
            });
        }
        let force = params.f1[j][j];
        out.freq[j] = (k / params.mass).sqrt();
        out.shift[j] = force / k;
        out.energy_offset[j] = -out.shift[j] * force / 2.0;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VibronicEnergies {
    /// Doubly dressed ladder for branches j = 1, 2 at vibrational level n.
    pub dds: [f64; 2],
    /// Parity doublet pair `omega0 (m+1) +- (2 Omega_v (n + 1/2) + sqrt(2n) Omega_v)`.
    pub pos: [f64; 2],
    /// `|Omega - Omega_v| / Omega_v`; the pair energies assume this is small.
    pub resonance_mismatch: f64,
}

pub fn vibronic_energies(params: &SystemParams, n: u32) -> Result<VibronicEnergies> {
    let omega = params.omega()?;
    let wv = params.omega_v;
    let mismatch = if wv > 0.0 {
        (omega - wv).abs() / wv
    } else {
        f64::INFINITY
    };
    if mismatch > 0.05 {
        warn!("vibronic energies assume resonance; |Omega - Omega_v| / Omega_v = {mismatch:.3}");
    }
    let center = params.omega0 * (params.m as f64 + 1.0);
    let ladder = 2.0 * wv * (n as f64 + 0.5) + omega;
    let springs = spring_constants(params, omega);
    let offset = |j: usize| {
        if springs[j] > 0.0 {
            -params.f1[j][j].powi(2) / (2.0 * springs[j])
        } else {
            0.0
        }
    };
    let split = 2.0 * wv * (n as f64 + 0.5) + (2.0 * n as f64).sqrt() * wv;
    Ok(VibronicEnergies {
        dds: [center + ladder + offset(0), center - ladder + offset(1)],
        pos: [center + split, center - split],
        resonance_mismatch: mismatch,
    })
}

/// Energies `(lower, upper)` of the coupled pair `{|xi1, k>, |xi2, k+1>}`.
pub fn pair_levels(params: &SystemParams, k: usize) -> Result<(f64, f64)> {
    let omega = params.omega()?;
    let wv = params.omega_v;
    let center = params.omega0 * (params.m as f64 + 1.0) + 2.0 * wv * (k as f64 + 1.0);
    let half = (omega - wv).hypot(wv * (k as f64 + 1.0).sqrt());
    Ok((center - half, center + half))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Bs,
    Ds,
    Dds,
    Pos,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Bs => "bs",
            BasisKind::Ds => "ds",
            BasisKind::Dds => "dds",
            BasisKind::Pos => "pos",
        }
    }
}

/// Orthonormal frame: column `k` is basis vector `labels[k]` written in the
/// computational basis of `space`.
#[derive(Clone, Debug)]
pub struct BasisSet {
    pub kind: BasisKind,
    pub space: ProductSpace,
    pub frame: CMatrix,
    pub energies: Vec<f64>,
    pub labels: Vec<String>,
    /// Parity eigenvalue per column, for frames built from parity doublets.
    pub parity: Option<Vec<i8>>,
}

impl BasisSet {
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.frame.ncols();
        linalg::max_abs(&(self.frame.adjoint() * &self.frame - CMatrix::identity(n, n)))
    }

    /// `frame^dag A frame`.
    pub fn conjugate(&self, op: &Operator) -> Result<CMatrix> {
        self.space.ensure_same(op.space())?;
        Ok(self.frame.adjoint() * op.matrix() * &self.frame)
    }

    fn sorted(mut self) -> Self {
        let mut order: Vec<usize> = (0..self.energies.len()).collect();
        order.sort_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]));
        let mut frame = CMatrix::zeros(self.frame.nrows(), self.frame.ncols());
        for (dst, &src) in order.iter().enumerate() {
            frame.set_column(dst, &self.frame.column(src));
        }
        self.frame = frame;
        self.energies = order.iter().map(|&k| self.energies[k]).collect();
        self.labels = order.iter().map(|&k| self.labels[k].clone()).collect();
        if let Some(p) = self.parity.take() {
            self.parity = Some(order.iter().map(|&k| p[k]).collect());
        }
        self
    }
}

fn suffix(space: &ProductSpace, digits: &[usize]) -> String {
    let mut s = String::new();
    for (f, d) in space.factors().iter().zip(digits) {
        match f.label.as_str() {
            TLS => {}
            PHOTON if f.dim == 1 => {}
            PHOTON => s.push_str(&format!("_m{d}")),
            other => s.push_str(&format!("_{}{d}", if other == VIB { "n" } else { other })),
        }
    }
    s
}

/// Closed-form basis frame of the given kind.
///
/// `Bs` is the identity in computational order (energies are the bare
/// diagonal and are not reordered). `Ds` diagonalizes [`build_jc`]. `Dds` and
/// `Pos` live in the dressed coordinates of [`build_vibronic`]: `Dds`
/// diagonalizes it exactly, `Pos` uses the resonant `1/sqrt(2)` doublets and
/// is block diagonal by parity. All but `Bs` are sorted by energy.
pub fn basis_set(params: &SystemParams, kind: BasisKind, space: &ProductSpace) -> Result<BasisSet> {
    params.validate()?;
    match kind {
        BasisKind::Bs => bare_basis(params, space),
        BasisKind::Ds => dressed_basis(params, space).map(BasisSet::sorted),
        BasisKind::Dds | BasisKind::Pos => doublet_basis(params, kind, space).map(BasisSet::sorted),
    }
}

/// Basis frame written in the dressed coordinates of [`build_vibronic`].
///
/// `Bs` gives the bare states `|phi1>`, `|phi2>` (the dressing rotation is
/// its own inverse), `Ds` the identity, `Dds` and `Pos` as in [`basis_set`].
/// `Bs` and `Ds` keep computational order.
pub fn vibronic_basis(params: &SystemParams, kind: BasisKind, space: &ProductSpace) -> Result<BasisSet> {
    params.validate()?;
    require_vibronic_space(space)?;
    if matches!(kind, BasisKind::Dds | BasisKind::Pos) {
        return basis_set(params, kind, space);
    }
    let d = params.dressed()?;
    let center = params.omega0 * (params.m as f64 + 1.0);
    let tls_pos = space.position(TLS)?;
    let n = space.dim();
    let mut frame = CMatrix::zeros(n, n);
    let mut energies = vec![0.0; n];
    let mut labels = vec![String::new(); n];
    let bare = kind == BasisKind::Bs;
    for i in 0..n {
        let digits = space.digits(i);
        let upper = digits[tls_pos] == 0;
        let sfx = suffix(space, &digits);
        let k = digits[space.position(VIB)?] as f64;
        let vib = 2.0 * params.omega_v * (k + 0.5);
        if bare {
            let mut other = digits.clone();
            other[tls_pos] = 1 - digits[tls_pos];
            let j = space.index_of(&other);
            // |phi1> = -u+ |xi1> + u- |xi2>, |phi2> = u- |xi1> + u+ |xi2>
            let (same, cross) = if upper { (-d.u_plus, d.u_minus) } else { (d.u_plus, d.u_minus) };
            frame[(i, i)] = c(same);
            frame[(j, i)] = c(cross);
            let m = params.m as f64;
            energies[i] = if upper {
                params.epsilon / 2.0 + params.omega0 * (m + 0.5)
            } else {
                -params.epsilon / 2.0 + params.omega0 * (m + 1.5)
            } + vib;
            labels[i] = format!("{}{sfx}", if upper { "phi1" } else { "phi2" });
        } else {
            frame[(i, i)] = c(1.0);
            energies[i] = center + if upper { d.omega } else { -d.omega } + vib;
            labels[i] = format!("{}{sfx}", if upper { "xi1" } else { "xi2" });
        }
    }
    Ok(BasisSet {
        kind,
        space: space.clone(),
        frame,
        energies,
        labels,
        parity: None,
    })
}

fn bare_basis(params: &SystemParams, space: &ProductSpace) -> Result<BasisSet> {
    let ph = photon_dim(space);
    let tls_pos = space.position(TLS)?;
    let ph_pos = space.position(PHOTON).ok();
    let n = space.dim();
    let mut energies = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let d = space.digits(i);
        let excited = d[tls_pos] == 0;
        let photons = match ph_pos {
            Some(p) if ph > 1 => d[p] as f64,
            _ => params.m as f64 + if excited { 0.0 } else { 1.0 },
        };
        let e = if excited { 0.5 } else { -0.5 } * params.epsilon + params.omega0 * (photons + 0.5);
        energies.push(e);
        labels.push(format!("{}{}", if excited { "phi1" } else { "phi2" }, suffix(space, &d)));
    }
    Ok(BasisSet {
        kind: BasisKind::Bs,
        space: space.clone(),
        frame: space.identity(),
        energies,
        labels,
        parity: None,
    })
}

fn dressed_basis(params: &SystemParams, space: &ProductSpace) -> Result<BasisSet> {
    let ph = photon_dim(space);
    let tls_pos = space.position(TLS)?;
    let n = space.dim();
    let mut frame = CMatrix::zeros(n, n);
    let mut energies = vec![0.0; n];
    let mut labels = vec![String::new(); n];
    if ph == 1 {
        let d = params.dressed()?;
        let center = params.omega0 * (params.m as f64 + 1.0);
        for i in 0..n {
            let digits = space.digits(i);
            if digits[tls_pos] != 0 {
                continue;
            }
            let mut lower = digits.clone();
            lower[tls_pos] = 1;
            let (e, g) = (i, space.index_of(&lower));
            // xi1 = -u+ |phi1> + u- |phi2>, xi2 = u- |phi1> + u+ |phi2>
            frame[(e, e)] = c(-d.u_plus);
            frame[(g, e)] = c(d.u_minus);
            frame[(e, g)] = c(d.u_minus);
            frame[(g, g)] = c(d.u_plus);
            energies[e] = center + d.omega;
            energies[g] = center - d.omega;
            let sfx = suffix(space, &digits);
            labels[e] = format!("xi1{sfx}");
            labels[g] = format!("xi2{sfx}");
        }
    } else {
        let ph_pos = space.position(PHOTON)?;
        for i in 0..n {
            let digits = space.digits(i);
            let p = digits[ph_pos];
            let excited = digits[tls_pos] == 0;
            let sfx = suffix(space, &digits);
            // |phi1, p> pairs with |phi2, p+1>
            if excited && p + 1 < ph {
                let d = analytics::dressed_coeffs(params.delta(), params.g0, p as u32)?;
                let mut partner = digits.clone();
                partner[tls_pos] = 1;
                partner[ph_pos] = p + 1;
                let g = space.index_of(&partner);
                frame[(i, i)] = c(-d.u_plus);
                frame[(g, i)] = c(d.u_minus);
                frame[(i, g)] = c(d.u_minus);
                frame[(g, g)] = c(d.u_plus);
                let center = params.omega0 * (p as f64 + 1.0);
                energies[i] = center + d.omega;
                energies[g] = center - d.omega;
                labels[i] = format!("xi1{sfx}");
                labels[g] = format!("xi2{}", suffix(space, &partner).replacen(&format!("_m{}", p + 1), &format!("_m{p}"), 1));
            } else if (excited && p + 1 == ph) || (!excited && p == 0) {
                frame[(i, i)] = c(1.0);
                let sign = if excited { 0.5 } else { -0.5 };
                energies[i] = sign * params.epsilon + params.omega0 * (p as f64 + 0.5);
                labels[i] = format!("{}{sfx}", if excited { "phi1" } else { "phi2" });
            }
        }
    }
    Ok(BasisSet {
        kind: BasisKind::Ds,
        space: space.clone(),
        frame,
        energies,
        labels,
        parity: None,
    })
}

fn doublet_basis(params: &SystemParams, kind: BasisKind, space: &ProductSpace) -> Result<BasisSet> {
    let nv = require_vibronic_space(space)?;
    let omega = params.omega()?;
    let wv = params.omega_v;
    let dressed = params.dressed()?;
    let center0 = params.omega0 * (params.m as f64 + 1.0);
    let n = space.dim();
    let idx = |tls: usize, k: usize| space.index_from_labels(&[(TLS, tls), (VIB, k)]);
    let mut frame = CMatrix::zeros(n, n);
    let mut energies = vec![0.0; n];
    let mut labels = vec![String::new(); n];
    let mut parity = vec![0i8; n];
    let pair_parity = |k: usize| -> i8 { if k.is_multiple_of(2) { -1 } else { 1 } };

    for k in 0..nv - 1 {
        let upper = idx(0, k)?;
        let lower = idx(1, k + 1)?;
        let coupling = wv * (k as f64 + 1.0).sqrt();
        let (vp, vm, e_hi, e_lo) = match kind {
            BasisKind::Dds if coupling > 0.0 || omega != wv => {
                let r = analytics::dds_coeffs(omega - wv, coupling, &dressed)?;
                let (lo, hi) = pair_levels(params, k)?;
                (r.v_plus, r.v_minus, hi, lo)
            }
            _ => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let center = center0 + 2.0 * wv * (k as f64 + 1.0);
                (s, s, center + coupling, center - coupling)
            }
        };
        // first column: v+ |xi1,k> + v- |xi2,k+1>; second: -v- |xi1,k> + v+ |xi2,k+1>
        frame[(upper, upper)] = c(vp);
        frame[(lower, upper)] = c(vm);
        frame[(upper, lower)] = c(-vm);
        frame[(lower, lower)] = c(vp);
        energies[upper] = e_hi;
        energies[lower] = e_lo;
        let (tag, hi, lo) = match kind {
            BasisKind::Dds => ("zeta", "1", "2"),
            _ => (if pair_parity(k) > 0 { "eta+" } else { "eta-" }, "hi", "lo"),
        };
        labels[upper] = format!("{tag}{hi}_n{k}");
        labels[lower] = format!("{tag}{lo}_n{k}");
        parity[upper] = pair_parity(k);
        parity[lower] = pair_parity(k);
    }
    // uncoupled edge states: |xi2, 0> and the truncation edge |xi1, nv-1>
    let ground = idx(1, 0)?;
    frame[(ground, ground)] = c(1.0);
    energies[ground] = center0 - omega + wv;
    labels[ground] = "xi2_n0".into();
    parity[ground] = 1;
    let edge = idx(0, nv - 1)?;
    frame[(edge, edge)] = c(1.0);
    energies[edge] = center0 + omega + 2.0 * wv * (nv as f64 - 0.5);
    labels[edge] = format!("xi1_n{}", nv - 1);
    parity[edge] = pair_parity(nv - 1);

    Ok(BasisSet {
        kind,
        space: space.clone(),
        frame,
        energies,
        labels,
        parity: Some(parity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{expectation, make_space, QuantumState};
    use approx::assert_relative_eq;

    fn manifold_space() -> ProductSpace {
        make_space(&[(TLS, 2), (PHOTON, 1)]).unwrap()
    }

    fn vib_space(n: usize) -> ProductSpace {
        make_space(&[(TLS, 2), (PHOTON, 1), (VIB, n)]).unwrap()
    }

    fn gap(h: &Operator) -> f64 {
        let (v, _) = linalg::hermitian_eigen(h.matrix());
        v[v.len() - 1] - v[0]
    }

    #[test]
    fn jc_decoupled_limit() {
        let p = SystemParams {
            epsilon: 5.0,
            omega0: 5.0,
            g0: 0.0,
            ..Default::default()
        };
        let s = make_space(&[(TLS, 2), (PHOTON, 4)]).unwrap();
        let h = build_jc(&p, &s).unwrap();
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                if i != j {
                    assert_eq!(h.matrix()[(i, j)], c(0.0));
                }
            }
        }
        // same photon number: levels differ by epsilon
        let e = s.index_from_labels(&[(TLS, 0), (PHOTON, 2)]).unwrap();
        let g = s.index_from_labels(&[(TLS, 1), (PHOTON, 2)]).unwrap();
        assert_relative_eq!((h.matrix()[(e, e)] - h.matrix()[(g, g)]).re, 5.0, epsilon = 1e-14);
    }

    #[test]
    fn jc_manifold_gaps() {
        let h = build_jc(&SystemParams::with_detuning(0.0, 1.0, 0), &manifold_space()).unwrap();
        assert_relative_eq!(gap(&h), 2.0, epsilon = 1e-13);
        let h = build_jc(&SystemParams::with_detuning(3.0, 1.0, 3), &manifold_space()).unwrap();
        assert_relative_eq!(gap(&h), 5.0, epsilon = 1e-13);
        assert_relative_eq!(h.matrix()[(0, 1)].re, -2.0, epsilon = 1e-15);
    }

    #[test]
    fn jc_full_fock_conserves_excitations() {
        let s = make_space(&[(TLS, 2), (PHOTON, 6), (VIB, 2)]).unwrap();
        let p = SystemParams {
            epsilon: 7.3,
            omega0: 6.1,
            g0: 0.4,
            m: 2,
            ..Default::default()
        };
        let h = build_jc(&p, &s).unwrap();
        let n = excitation_number(&p, &s).unwrap();
        assert!(h.commutator(&n).unwrap().max_norm() < 1e-12);
        let small = make_space(&[(TLS, 2), (PHOTON, 3)]).unwrap();
        assert!(build_jc(&p, &small).is_err());
    }

    #[test]
    fn jc_fixed_manifold_conserves_excitations() {
        let s = vib_space(3);
        let p = SystemParams {
            epsilon: 2.0,
            omega0: 1.2,
            g0: 0.5,
            m: 4,
            ..Default::default()
        };
        let h = build_jc(&p, &s).unwrap();
        let n = excitation_number(&p, &s).unwrap();
        assert!(h.commutator(&n).unwrap().max_norm() < 1e-12);
    }

    #[test]
    fn ds_frame_matches_closed_form_and_diagonalizes() {
        let p = SystemParams::with_detuning(0.0, 1.0, 0);
        let b = basis_set(&p, BasisKind::Ds, &manifold_space()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // columns sorted ascending: xi2 = (|phi1> + |phi2>)/sqrt2 then xi1 = (|phi2> - |phi1>)/sqrt2
        assert_eq!(b.labels, ["xi2", "xi1"]);
        assert_relative_eq!(b.frame[(0, 0)].re, s, epsilon = 1e-15);
        assert_relative_eq!(b.frame[(1, 0)].re, s, epsilon = 1e-15);
        assert_relative_eq!(b.frame[(0, 1)].re, -s, epsilon = 1e-15);
        assert_relative_eq!(b.frame[(1, 1)].re, s, epsilon = 1e-15);

        for (delta, g0, m) in [(3.0, 1.0, 3), (-2.0, 0.3, 0), (0.5, 2.0, 5)] {
            let p = SystemParams::with_detuning(delta, g0, m);
            for space in [manifold_space(), vib_space(3)] {
                let b = basis_set(&p, BasisKind::Ds, &space).unwrap();
                assert!(b.unitarity_residual() < 1e-10);
                let d = b.conjugate(&build_jc(&p, &space).unwrap()).unwrap();
                for i in 0..d.nrows() {
                    for j in 0..d.ncols() {
                        if i != j {
                            assert!(d[(i, j)].norm() < 1e-10);
                        } else {
                            assert!((d[(i, i)].re - b.energies[i]).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ds_frame_full_fock() {
        let s = make_space(&[(TLS, 2), (PHOTON, 5)]).unwrap();
        let p = SystemParams {
            epsilon: 4.0,
            omega0: 3.0,
            g0: 0.7,
            m: 1,
            ..Default::default()
        };
        let b = basis_set(&p, BasisKind::Ds, &s).unwrap();
        assert!(b.unitarity_residual() < 1e-10);
        let d = b.conjugate(&build_jc(&p, &s).unwrap()).unwrap();
        let off: f64 = (0..d.nrows())
            .flat_map(|i| (0..d.ncols()).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| d[(i, j)].norm())
            .fold(0.0, f64::max);
        assert!(off < 1e-10);
        for i in 0..d.nrows() {
            assert!((d[(i, i)].re - b.energies[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn bs_frame_is_identity() {
        let p = SystemParams::with_detuning(1.0, 1.0, 0);
        let b = basis_set(&p, BasisKind::Bs, &vib_space(3)).unwrap();
        assert_eq!(b.frame, vib_space(3).identity());
        assert_eq!(b.labels[0], "phi1_n0");
    }

    fn resonant(n_vib: usize) -> SystemParams {
        SystemParams {
            omega_v: 1.0,
            n_vib,
            ..SystemParams::with_detuning(0.0, 1.0, 0)
        }
    }

    #[test]
    fn vibronic_coordinates_frames() {
        let p = SystemParams {
            omega_v: 0.5,
            ..SystemParams::with_detuning(1.5, 0.8, 1)
        };
        let s = vib_space(3);
        let bs = vibronic_basis(&p, BasisKind::Bs, &s).unwrap();
        assert!(bs.unitarity_residual() < 1e-12);
        // bare frame maps back to the dressing frame built in bare coordinates
        let ds_in_bare = basis_set(&p, BasisKind::Ds, &make_space(&[(TLS, 2), (PHOTON, 1)]).unwrap()).unwrap();
        let xi1 = ds_in_bare.labels.iter().position(|l| l == "xi1").unwrap();
        let phi1 = bs.labels.iter().position(|l| l == "phi1_n0").unwrap();
        let up = s.index_from_labels(&[(TLS, 0), (VIB, 0)]).unwrap();
        assert_relative_eq!(bs.frame[(up, phi1)].re, ds_in_bare.frame[(0, xi1)].re, epsilon = 1e-15);
        let ds = vibronic_basis(&p, BasisKind::Ds, &s).unwrap();
        assert_eq!(ds.frame, s.identity());
        assert_eq!(ds.labels[0], "xi1_n0");
        let p0 = SystemParams { omega_v: 0.0, ..p.clone() };
        let ds0 = vibronic_basis(&p0, BasisKind::Ds, &s).unwrap();
        let d = ds0.conjugate(&build_vibronic(&p0, &s).unwrap()).unwrap();
        for i in 0..s.dim() {
            assert_relative_eq!(d[(i, i)].re, ds0.energies[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn vibronic_decoupled_is_diagonal() {
        let p = SystemParams {
            omega_v: 0.0,
            ..SystemParams::with_detuning(1.0, 1.0, 0)
        };
        let s = vib_space(4);
        let h = build_vibronic(&p, &s).unwrap();
        let omega = p.omega().unwrap();
        for i in 0..s.dim() {
            let d = s.digits(i);
            let sign = if d[0] == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(h.matrix()[(i, i)].re, sign * omega, epsilon = 1e-14);
        }
        assert!(linalg::max_abs(&(h.matrix() - CMatrix::from_diagonal(&h.matrix().diagonal()))) == 0.0);
    }

    #[test]
    fn vibronic_commutes_with_parity() {
        for n in [4, 8, 12, 16] {
            let s = vib_space(n);
            for p in [resonant(n), SystemParams { omega_v: 0.3, ..SystemParams::with_detuning(2.0, 0.7, 3) }] {
                let h = build_vibronic(&p, &s).unwrap();
                let pi = parity_op(&s).unwrap();
                assert!(h.commutator(&pi).unwrap().max_norm() < 1e-12);
            }
        }
        assert!(build_vibronic(&resonant(1), &vib_space(1)).is_err());
    }

    #[test]
    fn parity_properties() {
        let s = vib_space(6);
        let pi = parity_op(&s).unwrap();
        let sq = pi.dot(&pi).unwrap();
        assert!(linalg::max_abs(&(sq.matrix() - s.identity())) < 1e-12);
        let lower0 = QuantumState::basis(&s, &[(TLS, 1), (VIB, 0)]).unwrap();
        assert_relative_eq!(expectation(&pi, &lower0).unwrap().re, 1.0, epsilon = 1e-15);
        let b = basis_set(&resonant(6), BasisKind::Pos, &s).unwrap();
        let parity = b.parity.as_ref().unwrap();
        for (k, &sign) in parity.iter().enumerate() {
            let col = b.frame.column(k).into_owned();
            let image = pi.matrix() * &col;
            assert!((image - col.scale(sign as f64)).norm() < 1e-12, "{}", b.labels[k]);
        }
        assert!(parity.contains(&1) && parity.contains(&-1));
    }

    #[test]
    fn dds_and_pos_frames() {
        for p in [
            resonant(10),
            SystemParams { omega_v: 0.8, n_vib: 10, ..SystemParams::with_detuning(1.0, 0.6, 2) },
        ] {
            let s = vib_space(10);
            let h = build_vibronic(&p, &s).unwrap();
            let dds = basis_set(&p, BasisKind::Dds, &s).unwrap();
            assert!(dds.unitarity_residual() < 1e-10);
            let d = dds.conjugate(&h).unwrap();
            for i in 0..d.nrows() {
                for j in 0..d.ncols() {
                    let want = if i == j { dds.energies[i] } else { 0.0 };
                    assert!((d[(i, j)] - c(want)).norm() < 1e-10);
                }
            }
            assert!(dds.energies.windows(2).all(|w| w[0] <= w[1]));
            let pos = basis_set(&p, BasisKind::Pos, &s).unwrap();
            assert!(pos.unitarity_residual() < 1e-10);
            let parity = pos.parity.clone().unwrap();
            let d = pos.conjugate(&h).unwrap();
            for i in 0..d.nrows() {
                for j in 0..d.ncols() {
                    if parity[i] != parity[j] {
                        assert!(d[(i, j)].norm() < 1e-12);
                    }
                }
            }
            let round = &pos.frame * pos.frame.adjoint();
            assert!(linalg::max_abs(&(round - s.identity())) < 1e-12);
        }
        assert!(basis_set(&resonant(4), BasisKind::Dds, &manifold_space()).is_err());
    }

    #[test]
    fn displacement_group_and_identity() {
        let s = vib_space(8);
        let d0 = displacement_op(0.9, 0.0, &s).unwrap();
        assert!(linalg::max_abs(&(d0.matrix() - s.identity())) < 1e-12);
        let a = displacement_op(0.9, 0.7, &s).unwrap();
        let b = displacement_op(0.9, 1.9, &s).unwrap();
        let ab = displacement_op(0.9, 2.6, &s).unwrap();
        assert!(linalg::max_abs(&(a.dot(&b).unwrap().matrix() - ab.matrix())) < 1e-9);
        let u = a.dot(&a.dagger()).unwrap();
        assert!(linalg::max_abs(&(u.matrix() - s.identity())) < 1e-10);
    }

    #[test]
    fn displacement_eigenphases() {
        let s = vib_space(8);
        let p = resonant(8);
        let b = basis_set(&p, BasisKind::Dds, &s).unwrap();
        let (wv, t) = (1.0, 0.37);
        let d = displacement_op(wv, t, &s).unwrap();
        let phase_of = |label: &str| {
            let k = b.labels.iter().position(|l| l == label).unwrap();
            let col = b.frame.column(k).into_owned();
            col.dotc(&(d.matrix() * &col))
        };
        let z0 = phase_of("zeta1_n0");
        assert!((z0 - num_complex::Complex64::from_polar(1.0, wv * t)).norm() < 1e-10);
        let z0m = phase_of("zeta2_n0");
        assert!((z0m - num_complex::Complex64::from_polar(1.0, -wv * t)).norm() < 1e-10);
        let z3 = phase_of("zeta1_n3");
        assert!((z3.arg() - 2.0 * wv * t).abs() < 1e-10);
    }

    #[test]
    fn adiabatic_potential_cases() {
        let mut p = SystemParams::with_detuning(1.0, 1.0, 0);
        p.f1 = [[0.3, 0.5], [0.5, -0.1]];
        p.f2 = [[0.2, 0.0], [0.0, 0.4]];
        let omega = p.omega().unwrap();
        assert_eq!(adiabatic_potential(&p, 0.0).unwrap(), (omega, 0.0));
        // curvature against finite differences of sqrt(Omega^2 + (dr F12)^2)
        let exact = |x: f64| (omega * omega + (x * 0.5f64).powi(2)).sqrt();
        let h = 1e-3;
        let fd = (exact(h) - 2.0 * exact(0.0) + exact(-h)) / (h * h);
        let poly = |x: f64| adiabatic_potential(&p, x).unwrap().0;
        let curv = (poly(h) - 2.0 * poly(0.0) + poly(-h)) / (h * h);
        assert_relative_eq!(fd, 0.25 / omega, max_relative = 1e-6);
        assert_relative_eq!(curv, 0.25 / omega, max_relative = 1e-9);
        p.f1[0][1] = 0.0;
        p.f1[1][0] = 0.0;
        assert_eq!(adiabatic_potential(&p, 0.7).unwrap().0, omega);
        assert!(adiabatic_potential(&SystemParams::with_detuning(0.0, 0.0, 0), 0.1).is_err());
    }

    #[test]
    fn oscillator_cases() {
        let mut p = SystemParams::with_detuning(0.0, 1.0, 0);
        p.mass = 1.0;
        p.f1 = [[0.1, 1.0], [1.0, 0.0]];
        let sol = oscillator_solution(&p).unwrap();
        assert_relative_eq!(sol.shift[0], 0.1, epsilon = 1e-15);
        assert_eq!(sol.shift[1], 0.0);
        assert_relative_eq!(sol.freq[0], 1.0, epsilon = 1e-15);
        // F2 = 0: both wells at |F12| / sqrt(M Omega)
        p.mass = 2.5;
        p.epsilon = 1.5;
        let sol = oscillator_solution(&p).unwrap();
        let expect = 1.0 / (2.5 * p.omega().unwrap()).sqrt();
        assert_relative_eq!(sol.freq[0], expect, epsilon = 1e-15);
        assert_relative_eq!(sol.freq[1], expect, epsilon = 1e-15);
        p.f2 = [[0.0, 0.0], [0.0, 10.0]];
        assert!(matches!(oscillator_solution(&p), Err(Error::UnstableBranch { branch: 2, .. })));
    }

    #[test]
    fn vibronic_energy_labels() {
        let p = resonant(10);
        let e = vibronic_energies(&p, 0).unwrap();
        assert_relative_eq!(e.pos[0] - e.pos[1], 2.0 * p.omega_v, epsilon = 1e-14);
        let e2 = vibronic_energies(&p, 2).unwrap();
        let split = (e2.pos[0] - e2.pos[1]) / 2.0 - 2.0 * p.omega_v * 2.5;
        assert_relative_eq!(split, 2.0 * p.omega_v, epsilon = 1e-14);
        assert_eq!(e.resonance_mismatch, 0.0);
        // antisymmetric about the manifold centre
        let center = p.omega0 * (p.m as f64 + 1.0);
        assert_relative_eq!(e2.pos[0] - center, center - e2.pos[1], epsilon = 1e-14);
    }

    #[test]
    fn vibronic_doublet_splitting_matches_numerics() {
        let p = SystemParams {
            omega_v: 0.6,
            epsilon: 3.0,
            omega0: 3.0,
            m: 2,
            n_vib: 14,
            ..SystemParams::with_detuning(0.0, 0.6 / 3f64.sqrt(), 2)
        };
        assert_relative_eq!(p.omega().unwrap(), 0.6, epsilon = 1e-14);
        let s = vib_space(14);
        let h = build_vibronic(&p, &s).unwrap();
        for n in 1..=3u32 {
            // the even doublet on {|xi1, 2n-1>, |xi2, 2n>}
            let a = s.index_from_labels(&[(TLS, 0), (VIB, 2 * n as usize - 1)]).unwrap();
            let b = s.index_from_labels(&[(TLS, 1), (VIB, 2 * n as usize)]).unwrap();
            let block = CMatrix::from_fn(2, 2, |i, j| {
                let idx = [a, b];
                h.matrix()[(idx[i], idx[j])]
            });
            let (v, _) = linalg::hermitian_eigen(&block);
            let e = vibronic_energies(&p, n).unwrap();
            let half_gap = (e.pos[0] - e.pos[1]) / 2.0 - 2.0 * p.omega_v * (n as f64 + 0.5);
            assert!(((v[1] - v[0]) / 2.0 - half_gap).abs() < 1e-8);
        }
    }
}
