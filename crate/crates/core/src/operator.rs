use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, is_hermitian, unvectorize, vectorize, CMatrix};
use crate::trajectory::Trajectory;

/// A square complex matrix acting on the system Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(CMatrix);

impl Operator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::invalid(format!(
                "operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("operator has non-finite entries"));
        }
        Ok(Self(m))
    }

    /// Builds an operator from real row-major entries.
    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: rows.len(),
            });
        }
        Self::new(CMatrix::from_fn(dim, dim, |i, j| c(rows[i * dim + j], 0.0)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn sigma_x() -> Self {
        Self::from_real_rows(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub fn sigma_z() -> Self {
        Self::from_real_rows(2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    /// Lowering operator `|1⟩⟨0|`, taking the excited state 0 to the ground state 1.
    pub fn sigma_m() -> Self {
        Self::from_real_rows(2, &[0.0, 0.0, 1.0, 0.0]).unwrap()
    }

    /// `|i⟩⟨i|` in a `dim`-level space.
    pub fn projector(dim: usize, i: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(i, i)] = c(1.0, 0.0);
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn is_hermitian(&self) -> bool {
        is_hermitian(&self.0, 1e-12 * (1.0 + crate::linalg::max_abs(&self.0)))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(&self.0 * c(s, 0.0))
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Self(crate::linalg::kron(&self.0, &other.0))
    }

    /// Diagonal entries if the operator is diagonal, else `None`.
    pub fn diagonal_values(&self) -> Option<Vec<Complex64>> {
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.0[(i, j)] != c(0.0, 0.0) {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.0[(i, i)]).collect())
    }
}

impl Deref for Operator {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

impl std::ops::Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

/// The reduced density matrix of the system.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::invalid("density matrix must be square and non-empty"));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("density matrix has non-finite entries"));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix produced by a propagation method without validation.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    /// `|i⟩⟨i|`.
    pub fn pure_state(dim: usize, i: usize) -> Self {
        Self(Operator::projector(dim, i).into_matrix())
    }

    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        Operator::from_real_rows(dim, rows).and_then(|o| Self::new(o.into_matrix()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn population(&self, i: usize) -> f64 {
        self.0[(i, i)].re
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        crate::linalg::max_abs(&(&self.0 - self.0.adjoint()))
    }

    /// Eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.0 + self.0.adjoint()) * c(0.5, 0.0);
        crate::linalg::hermitian_eigen(&h).0
    }
}

impl Deref for DensityMatrix {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

/// A time-dependent classical field `V(t)` coupling through a Hermitian operator.
#[derive(Clone)]
pub struct ExternalField {
    amplitude: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    coupling_op: Operator,
}

impl ExternalField {
    pub fn new(amplitude: impl Fn(f64) -> f64 + Send + Sync + 'static, coupling_op: Operator) -> Result<Self> {
        if !coupling_op.is_hermitian() {
            return Err(Error::NotHermitian("external field coupling operator"));
        }
        Ok(Self {
            amplitude: Arc::new(amplitude),
            coupling_op,
        })
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        (self.amplitude)(t)
    }

    pub fn coupling_op(&self) -> &Operator {
        &self.coupling_op
    }
}

impl fmt::Debug for ExternalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalField")
            .field("coupling_op", &self.coupling_op)
            .finish_non_exhaustive()
    }
}

/// `H(t) = H + Σ V_f(t) O_f`.
pub(crate) fn hamiltonian_at(h: &CMatrix, fields: &[ExternalField], t: f64) -> CMatrix {
    let mut out = h.clone();
    for f in fields {
        let v = f.amplitude(t);
        if v != 0.0 {
            out += f.coupling_op.matrix() * c(v, 0.0);
        }
    }
    out
}

/// Two-level Hamiltonian `ε σz − Ω σx` (ħ = 1).
pub fn create_tls_hamiltonian(epsilon: f64, omega: f64) -> Operator {
    Operator::from_real_rows(2, &[epsilon, -omega, -omega, -epsilon]).unwrap()
}

/// Tight-binding chain with the given site energies and uniform coupling.
pub fn create_nn_hamiltonian(site_energies: &[f64], coupling: f64, periodic: bool) -> Result<Operator> {
    let n = site_energies.len();
    if n == 0 {
        return Err(Error::invalid("nearest-neighbour Hamiltonian needs at least one site"));
    }
    if periodic && n < 3 {
        return Err(Error::invalid(format!(
            "periodic nearest-neighbour Hamiltonian needs at least 3 sites, got {n}"
        )));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, &e) in site_energies.iter().enumerate() {
        m[(i, i)] = c(e, 0.0);
        if i + 1 < n {
            m[(i, i + 1)] = c(coupling, 0.0);
            m[(i + 1, i)] = c(coupling, 0.0);
        }
    }
    if periodic {
        m[(0, n - 1)] = c(coupling, 0.0);
        m[(n - 1, 0)] = c(coupling, 0.0);
    }
    Operator::new(m)
}

/// Time series of cumulative propagators `E(kΔt)`, each a `d²×d²` map on
/// row-major vectorized density matrices. `maps[k - 1]` holds `E(kΔt)`;
/// `E(0)` is the identity and is not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedPropagatorSeries {
    pub dt: f64,
    pub maps: Vec<CMatrix>,
}

impl AugmentedPropagatorSeries {
    pub fn new(dt: f64, maps: Vec<CMatrix>) -> Self {
        Self { dt, maps }
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Hilbert-space dimension `d`.
    pub fn system_dim(&self) -> usize {
        self.maps
            .first()
            .map(|m| (m.nrows() as f64).sqrt().round() as usize)
            .unwrap_or(0)
    }
}

/// Applies cumulative propagators to `rho0`; entry `k` of the result is
/// `E(kΔt) vec(ρ0)` and entry 0 is `ρ0` itself.
pub fn apply_propagator(
    propagators: &AugmentedPropagatorSeries,
    rho0: &DensityMatrix,
    dt: f64,
    ntimes: usize,
) -> Result<Trajectory> {
    if propagators.len() < ntimes {
        return Err(Error::invalid(format!(
            "{} propagators supplied for {ntimes} steps",
            propagators.len()
        )));
    }
    let d = rho0.dim();
    let v0 = vectorize(rho0.matrix());
    let mut states = Vec::with_capacity(ntimes + 1);
    states.push(rho0.clone());
    for e in &propagators.maps[..ntimes] {
        if e.nrows() != d * d || e.ncols() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: e.nrows(),
            });
        }
        states.push(DensityMatrix::from_matrix_unchecked(unvectorize(&(e * &v0), d)));
    }
    Ok(Trajectory::uniform(dt, states))
}
