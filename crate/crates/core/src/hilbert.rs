//! Tensor-product spaces, operators, states and the basic operator algebra.
//!
//! Factor order is fixed to `tls`, `ph`, `vib` (unknown labels follow in the
//! order given). Basis ordering is row-major over factors, so the last factor
//! varies fastest. On the two-level factor index 0 is the upper level
//! (excited bare state, or the upper dressed state when the factor is read in
//! the dressed basis) and index 1 the lower one.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64};

pub const TLS: &str = "tls";
pub const PHOTON: &str = "ph";
pub const VIB: &str = "vib";

const OPERATOR_HERMITIAN_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-10;
const DENSITY_TOL: f64 = 1e-10;
const DENSITY_MIN_EIG: f64 = -1e-8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

impl Factor {
    /// Truncated bosonic factors are everything but the two-level factor,
    /// as long as they carry more than one level.
    pub fn is_truncated(&self) -> bool {
        self.label != TLS && self.dim > 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductSpace {
    factors: Vec<Factor>,
}

fn factor_rank(label: &str) -> u8 {
    match label {
        TLS => 0,
        PHOTON => 1,
        VIB => 2,
        _ => 3,
    }
}

/// Build a validated product space. Known labels are put in canonical order.
pub fn make_space(factors: &[(&str, usize)]) -> Result<ProductSpace> {
    ProductSpace::new(factors)
}

impl ProductSpace {
    pub fn new(factors: &[(&str, usize)]) -> Result<Self> {
        Self::build(factors, true)
    }

    fn build(factors: &[(&str, usize)], require_tls: bool) -> Result<Self> {
        let mut list: Vec<Factor> = Vec::with_capacity(factors.len());
        for &(label, dim) in factors {
            if dim == 0 {
                return Err(Error::InvalidSpace(format!("factor `{label}` has zero dimension")));
            }
            if list.iter().any(|f| f.label == label) {
                return Err(Error::InvalidSpace(format!("duplicate factor `{label}`")));
            }
            list.push(Factor {
                label: label.to_string(),
                dim,
            });
        }
        match list.iter().find(|f| f.label == TLS) {
            None if !require_tls => {}
            None => return Err(Error::InvalidSpace("missing `tls` factor".into())),
            Some(f) if f.dim != 2 => {
                return Err(Error::InvalidSpace(format!(
                    "`tls` factor must have dimension 2, got {}",
                    f.dim
                )))
            }
            _ => {}
        }
        list.sort_by_key(|f| factor_rank(&f.label));
        Ok(Self { factors: list })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn has(&self, label: &str) -> bool {
        self.factors.iter().any(|f| f.label == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::UnknownFactor(label.to_string()))
    }

    pub fn factor_dim(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].dim)
    }

    /// Flat index of a multi-index (one digit per factor).
    pub fn index_of(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.factors.len());
        digits
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&d, f)| acc * f.dim + d)
    }

    /// Multi-index of a flat index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, f) in out.iter_mut().zip(&self.factors).rev() {
            *slot = index % f.dim;
            index /= f.dim;
        }
        out
    }

    /// Flat index from `(label, level)` pairs; missing factors sit at level 0.
    pub fn index_from_labels(&self, levels: &[(&str, usize)]) -> Result<usize> {
        let mut digits = vec![0; self.factors.len()];
        for &(label, level) in levels {
            let pos = self.position(label)?;
            if level >= self.factors[pos].dim {
                return Err(Error::InvalidSpace(format!(
                    "level {level} out of range for factor `{label}` (dim {})",
                    self.factors[pos].dim
                )));
            }
            digits[pos] = level;
        }
        Ok(self.index_of(&digits))
    }

    /// Embed a single-factor matrix with identities on every other factor.
    pub fn embed(&self, label: &str, local: &CMatrix) -> Result<CMatrix> {
        let pos = self.position(label)?;
        let dim = self.factors[pos].dim;
        if local.nrows() != dim || local.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: local.nrows(),
            });
        }
        let before: usize = self.factors[..pos].iter().map(|f| f.dim).product();
        let after: usize = self.factors[pos + 1..].iter().map(|f| f.dim).product();
        let left = linalg::kron(&CMatrix::identity(before, before), local);
        Ok(linalg::kron(&left, &CMatrix::identity(after, after)))
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::identity(self.dim(), self.dim())
    }

    pub(crate) fn ensure_same(&self, other: &ProductSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for ProductSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|x| format!("{}:{}", x.label, x.dim))
            .collect();
        write!(f, "{}", parts.join(" x "))
    }
}

/// A square matrix tied to a product space.
#[derive(Clone, Debug)]
pub struct Operator {
    space: ProductSpace,
    matrix: CMatrix,
    hermitian_hint: bool,
}

impl Operator {
    pub fn new(space: ProductSpace, matrix: CMatrix) -> Result<Self> {
        let n = space.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self {
            space,
            matrix,
            hermitian_hint: false,
        })
    }

    /// Like [`Operator::new`], but checks and records hermiticity.
    pub fn hermitian(space: ProductSpace, matrix: CMatrix) -> Result<Self> {
        let mut op = Self::new(space, matrix)?;
        let residual = linalg::hermiticity_residual(&op.matrix);
        if residual >= OPERATOR_HERMITIAN_TOL {
            return Err(Error::NotHermitian { residual });
        }
        op.hermitian_hint = true;
        Ok(op)
    }

    pub fn identity(space: &ProductSpace) -> Self {
        Self {
            matrix: space.identity(),
            space: space.clone(),
            hermitian_hint: true,
        }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_hint
    }

    pub fn dagger(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
            hermitian_hint: self.hermitian_hint,
        }
    }

    pub fn dot(&self, rhs: &Operator) -> Result<Operator> {
        self.space.ensure_same(&rhs.space)?;
        Operator::new(self.space.clone(), &self.matrix * &rhs.matrix)
    }

    pub fn add(&self, rhs: &Operator) -> Result<Operator> {
        self.space.ensure_same(&rhs.space)?;
        Ok(Operator {
            space: self.space.clone(),
            matrix: &self.matrix + &rhs.matrix,
            hermitian_hint: self.hermitian_hint && rhs.hermitian_hint,
        })
    }

    pub fn scaled(&self, factor: f64) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.scale(factor),
            hermitian_hint: self.hermitian_hint,
        }
    }

    /// `[self, rhs]`
    pub fn commutator(&self, rhs: &Operator) -> Result<Operator> {
        self.space.ensure_same(&rhs.space)?;
        Operator::new(
            self.space.clone(),
            &self.matrix * &rhs.matrix - &rhs.matrix * &self.matrix,
        )
    }

    pub fn max_norm(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    pub fn apply(&self, state: &QuantumState) -> Result<CVector> {
        self.space.ensure_same(&state.space)?;
        Ok(&self.matrix * &state.amplitudes)
    }
}

/// A normalized pure state.
#[derive(Clone, Debug)]
pub struct QuantumState {
    space: ProductSpace,
    amplitudes: CVector,
}

impl QuantumState {
    pub fn new(space: ProductSpace, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::Dimension {
                expected: space.dim(),
                got: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { space, amplitudes })
    }

    /// Normalize an arbitrary nonzero vector.
    pub fn normalized(space: ProductSpace, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Self::new(space, amplitudes.unscale(norm))
    }

    /// Product basis state given `(label, level)` pairs; omitted factors at 0.
    pub fn basis(space: &ProductSpace, levels: &[(&str, usize)]) -> Result<Self> {
        let idx = space.index_from_labels(levels)?;
        let mut amps = CVector::zeros(space.dim());
        amps[idx] = c(1.0);
        Ok(Self {
            space: space.clone(),
            amplitudes: amps,
        })
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Skips the normalization check; for propagators that are unitary by construction.
    pub(crate) fn from_raw(space: ProductSpace, amplitudes: CVector) -> Self {
        Self { space, amplitudes }
    }
}

/// A Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug)]
pub struct DensityOp {
    space: ProductSpace,
    matrix: CMatrix,
}

impl DensityOp {
    pub fn new(space: ProductSpace, matrix: CMatrix) -> Result<Self> {
        let n = space.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: matrix.nrows(),
            });
        }
        let herm = linalg::hermiticity_residual(&matrix);
        if herm > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("not Hermitian ({herm:.3e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min_eig = linalg::min_hermitian_eigenvalue(&matrix);
        if min_eig < DENSITY_MIN_EIG {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn pure(state: &QuantumState) -> Self {
        let v = &state.amplitudes;
        Self {
            space: state.space.clone(),
            matrix: v * v.adjoint(),
        }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_hermitian_eigenvalue(&self.matrix)
    }

    pub(crate) fn from_raw(space: ProductSpace, matrix: CMatrix) -> Self {
        Self { space, matrix }
    }
}

/// Either kind of state, for functions that accept both.
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    Pure(&'a QuantumState),
    Mixed(&'a DensityOp),
}

impl<'a> From<&'a QuantumState> for StateRef<'a> {
    fn from(s: &'a QuantumState) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityOp> for StateRef<'a> {
    fn from(s: &'a DensityOp) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    pub fn space(&self) -> &ProductSpace {
        match self {
            StateRef::Pure(s) => &s.space,
            StateRef::Mixed(r) => &r.space,
        }
    }

    /// Diagonal of the state in the computational basis.
    pub fn populations(&self) -> Vec<f64> {
        match self {
            StateRef::Pure(s) => s.amplitudes.iter().map(|z| z.norm_sqr()).collect(),
            StateRef::Mixed(r) => r.matrix.diagonal().iter().map(|z| z.re).collect(),
        }
    }
}

/// `<psi|A|psi>` or `Tr(A rho)`.
pub fn expectation<'a>(op: &Operator, state: impl Into<StateRef<'a>>) -> Result<C64> {
    let state = state.into();
    op.space.ensure_same(state.space())?;
    Ok(match state {
        StateRef::Pure(s) => s.amplitudes.dotc(&(&op.matrix * &s.amplitudes)),
        StateRef::Mixed(r) => (&op.matrix * &r.matrix).trace(),
    })
}

/// Trace out every factor not listed in `keep`.
pub fn partial_trace(rho: &DensityOp, keep: &[&str]) -> Result<DensityOp> {
    if keep.is_empty() {
        return Err(Error::InvalidSpace("partial trace needs at least one kept factor".into()));
    }
    let space = &rho.space;
    let mut kept_pos = Vec::with_capacity(keep.len());
    for &label in keep {
        kept_pos.push(space.position(label)?);
    }
    kept_pos.sort_unstable();
    kept_pos.dedup();
    let pairs: Vec<(&str, usize)> = kept_pos
        .iter()
        .map(|&p| (space.factors[p].label.as_str(), space.factors[p].dim))
        .collect();
    let reduced_space = ProductSpace::build(&pairs, false)?;
    if kept_pos.len() == space.factors.len() {
        return Ok(DensityOp::from_raw(reduced_space, rho.matrix.clone()));
    }

    let n = space.dim();
    let digits: Vec<Vec<usize>> = (0..n).map(|i| space.digits(i)).collect();
    let reduced_index = |d: &[usize]| -> usize {
        kept_pos
            .iter()
            .fold(0, |acc, &p| acc * space.factors[p].dim + d[p])
    };
    let traced_match = |a: &[usize], b: &[usize]| -> bool {
        (0..space.factors.len())
            .filter(|p| !kept_pos.contains(p))
            .all(|p| a[p] == b[p])
    };
    let mut out = CMatrix::zeros(reduced_space.dim(), reduced_space.dim());
    for i in 0..n {
        for j in 0..n {
            if traced_match(&digits[i], &digits[j]) {
                out[(reduced_index(&digits[i]), reduced_index(&digits[j]))] += rho.matrix[(i, j)];
            }
        }
    }
    Ok(DensityOp::from_raw(reduced_space, out))
}

fn local_lowering(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = c((n as f64).sqrt());
    }
    a
}

/// Lowering and raising operators of a bosonic factor.
pub fn ladder_ops(space: &ProductSpace, factor: &str) -> Result<(Operator, Operator)> {
    let dim = space.factor_dim(factor)?;
    if factor == TLS || dim < 2 {
        return Err(Error::InvalidSpace(format!(
            "ladder operators need a bosonic factor with dim >= 2 (`{factor}` has {dim})"
        )));
    }
    let lower = Operator::new(space.clone(), space.embed(factor, &local_lowering(dim))?)?;
    let raise = lower.dagger();
    Ok((lower, raise))
}

/// Number operator `a^dag a` of a bosonic factor.
pub fn number_op(space: &ProductSpace, factor: &str) -> Result<Operator> {
    let dim = space.factor_dim(factor)?;
    let local = CMatrix::from_fn(dim, dim, |i, j| if i == j { c(i as f64) } else { c(0.0) });
    Operator::hermitian(space.clone(), space.embed(factor, &local)?)
}

#[derive(Clone, Debug)]
pub struct TlsOps {
    pub sz: Operator,
    pub sp: Operator,
    pub sm: Operator,
    pub s0: Operator,
}

/// Pauli operators of the two-level factor: `sz = diag(+1, -1)`,
/// `sp = |0><1|` (raises the lower level), `sm = sp^dag`, `s0 = identity`.
pub fn tls_ops(space: &ProductSpace) -> Result<TlsOps> {
    let z = c(0.0);
    let one = c(1.0);
    let sz = CMatrix::from_row_slice(2, 2, &[one, z, z, -one]);
    let sp = CMatrix::from_row_slice(2, 2, &[z, one, z, z]);
    let sp_op = Operator::new(space.clone(), space.embed(TLS, &sp)?)?;
    Ok(TlsOps {
        sz: Operator::hermitian(space.clone(), space.embed(TLS, &sz)?)?,
        sm: sp_op.dagger(),
        sp: sp_op,
        s0: Operator::identity(space),
    })
}

/// Population of the top level of every truncated factor.
pub fn top_level_populations<'a>(state: impl Into<StateRef<'a>>) -> Vec<(String, f64)> {
    let state = state.into();
    let space = state.space();
    let pops = state.populations();
    space
        .factors()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_truncated())
        .map(|(pos, f)| {
            let total = pops
                .iter()
                .enumerate()
                .filter(|(i, _)| space.digits(*i)[pos] == f.dim - 1)
                .map(|(_, p)| p)
                .sum();
            (f.label.clone(), total)
        })
        .collect()
}
