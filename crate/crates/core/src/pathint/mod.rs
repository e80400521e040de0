//! Path-integral propagation over forward-backward system paths: iterative
//! QuAPI, blip-decomposed augmented propagators, and a brute-force path sum.

mod blip;
mod brute;
mod quapi;

pub use blip::build_augmented_propagator_blip;
pub use brute::brute_force_path_sum;
pub use quapi::{build_augmented_propagator_quapi, propagate_quapi, propagate_quapi_with_eta};
pub(crate) use quapi::{prepare_tables, Engine, PointWeights};

use num_complex::Complex64;

use crate::bath::{compute_eta, EtaCoefficients, SpectralDensity};
use crate::empirical::check_dt;
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::linalg::{conj_kron, to_row_major, unitary_propagator, CMatrix};
use crate::operator::{hamiltonian_at, AugmentedPropagatorSeries, ExternalField, Operator};

/// Per-step forward-backward propagators; `entries[k]` maps `vec(ρ)` at
/// `kΔt` to `(k+1)Δt`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardBackwardPropagatorSeries {
    pub dt: f64,
    pub entries: Vec<CMatrix>,
}

impl ForwardBackwardPropagatorSeries {
    pub fn new(dt: f64, entries: Vec<CMatrix>) -> Result<Self> {
        check_dt(dt)?;
        let n = entries.first().map_or(0, |m| m.nrows());
        if entries.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::invalid("forward-backward propagators must share one square shape"));
        }
        let d = (n as f64).sqrt().round() as usize;
        if d * d != n {
            return Err(Error::invalid(format!("propagator size {n} is not a square d²")));
        }
        Ok(Self { dt, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn system_dim(&self) -> usize {
        self.entries
            .first()
            .map_or(0, |m| (m.nrows() as f64).sqrt().round() as usize)
    }

    /// Cumulative products, i.e. the bath-free augmented propagators.
    pub fn cumulative(&self) -> AugmentedPropagatorSeries {
        let mut acc: Option<CMatrix> = None;
        let maps = self
            .entries
            .iter()
            .map(|e| {
                let next = match &acc {
                    None => e.clone(),
                    Some(a) => e * a,
                };
                acc = Some(next.clone());
                next
            })
            .collect();
        AugmentedPropagatorSeries::new(self.dt, maps)
    }
}

/// `U_k ⊗ U_k*` for the step propagators of `H(t) = H + Σ V(t) O`.
pub fn calculate_bare_propagators(
    hamiltonian: &Operator,
    dt: f64,
    ntimes: usize,
    external_fields: &[ExternalField],
) -> Result<ForwardBackwardPropagatorSeries> {
    check_dt(dt)?;
    let d = hamiltonian.dim();
    for f in external_fields {
        crate::empirical::check_dim(d, f.coupling_op().dim())?;
    }
    if external_fields.is_empty() {
        let u = unitary_propagator(hamiltonian.matrix(), dt);
        let fb = conj_kron(&u);
        return ForwardBackwardPropagatorSeries::new(dt, vec![fb; ntimes]);
    }
    // Time-ordered exponential: integrate dU/dt = −iH(t)U across each step.
    let h = hamiltonian.matrix();
    let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-13);
    let mut entries = Vec::with_capacity(ntimes);
    let y0 = to_row_major(&CMatrix::identity(d, d));
    for k in 0..ntimes {
        let t0 = k as f64 * dt;
        let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            let ht = to_row_major(&hamiltonian_at(h, external_fields, t));
            crate::linalg::matmul_into(d, &ht, y, dy);
            for v in dy.iter_mut() {
                *v *= -crate::linalg::I;
            }
        };
        let out = integrate(rhs, &y0, &[t0, t0 + dt], &cfg)?;
        let u = crate::linalg::from_row_major(d, &out[1]);
        entries.push(conj_kron(&u));
    }
    ForwardBackwardPropagatorSeries::new(dt, entries)
}

/// A harmonic bath seen by the path integral: its spectral density and the
/// eigenvalues of its (diagonal) coupling operator, one per system state.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBath {
    pub sd: SpectralDensity,
    pub svec: Vec<f64>,
}

impl PathBath {
    pub fn new(sd: SpectralDensity, svec: Vec<f64>) -> Self {
        Self { sd, svec }
    }

    /// `σz`-type coupling with `s = ±1`.
    pub fn spin_boson(sd: SpectralDensity) -> Self {
        Self::new(sd, vec![1.0, -1.0])
    }
}

/// An η table together with the `s` values it couples to.
#[derive(Clone, Debug, PartialEq)]
pub struct BathInfluence {
    pub eta: EtaCoefficients,
    pub svec: Vec<f64>,
}

/// η-coefficients of every bath up to `max_lag`, paired with its `svec`.
pub fn influences(baths: &[PathBath], beta: f64, dt: f64, max_lag: usize) -> Result<Vec<BathInfluence>> {
    baths
        .iter()
        .map(|b| {
            Ok(BathInfluence {
                eta: compute_eta(&b.sd, beta, dt, max_lag.max(1))?,
                svec: b.svec.clone(),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuapiArgs {
    /// Path amplitudes below this magnitude are dropped.
    pub filter_cutoff: f64,
    /// Largest path tensor, in complex elements, that may be allocated.
    pub max_elements: u128,
}

impl Default for QuapiArgs {
    fn default() -> Self {
        Self {
            filter_cutoff: 0.0,
            max_elements: 1 << 26,
        }
    }
}

/// Fails with `BudgetExceeded` when a tensor over `points` path points of
/// `d2` forward-backward states would exceed `budget` elements.
pub fn check_budget(d2: usize, points: usize, budget: u128) -> Result<()> {
    let required = (d2 as u128).checked_pow(points as u32).unwrap_or(u128::MAX);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    Ok(())
}

pub(crate) fn check_svecs(d: usize, infl: &[BathInfluence]) -> Result<()> {
    for b in infl {
        if b.svec.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: b.svec.len(),
            });
        }
    }
    Ok(())
}

/// Kinds of pairs of time points, see [`EtaCoefficients`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum PairClass {
    Interior,
    Start,
    End,
    EndStart,
}

impl PairClass {
    fn of(k: usize, kp: usize, n_total: usize) -> Self {
        match (k == n_total, kp == 0) {
            (true, true) => Self::EndStart,
            (true, false) => Self::End,
            (false, true) => Self::Start,
            (false, false) => Self::Interior,
        }
    }
}

/// Influence-functional factors for forward-backward indices `j = i·d + i'`,
/// multiplied over baths: `exp(−Δs_j (η s⁺_{j'} − η* s⁻_{j'}))`.
pub(crate) struct FactorTables {
    pub d2: usize,
    diag_interior: Vec<Complex64>,
    diag_edge: Vec<Complex64>,
    // [class][lag] → d2 × d2, row = newer point
    pairs: [Vec<Vec<Complex64>>; 4],
}

pub(crate) fn pair_factor(infl: &[BathInfluence], d: usize, eta: impl Fn(&EtaCoefficients) -> Complex64, j: usize, jp: usize) -> Complex64 {
    let mut e = Complex64::new(0.0, 0.0);
    for b in infl {
        let s = &b.svec;
        let ds = s[j / d] - s[j % d];
        if ds == 0.0 {
            continue;
        }
        let h = eta(&b.eta);
        e -= ds * (h * s[jp / d] - h.conj() * s[jp % d]);
    }
    e.exp()
}

impl FactorTables {
    pub fn new(infl: &[BathInfluence], d: usize, max_lag: usize) -> Self {
        let d2 = d * d;
        let diag = |edge: bool| -> Vec<Complex64> {
            (0..d2)
                .map(|j| {
                    pair_factor(
                        infl,
                        d,
                        |e| if edge { e.get(0, 0, 1) } else { e.interior(0) },
                        j,
                        j,
                    )
                })
                .collect()
        };
        let table = |class: PairClass| -> Vec<Vec<Complex64>> {
            (0..=max_lag)
                .map(|lag| {
                    if lag == 0 {
                        return Vec::new();
                    }
                    // a representative (k, k', N) of the class with this lag
                    let (k, kp, n) = match class {
                        PairClass::Interior => (lag + 1, 1, lag + 2),
                        PairClass::Start => (lag, 0, lag + 1),
                        PairClass::End => (lag + 1, 1, lag + 1),
                        PairClass::EndStart => (lag, 0, lag),
                    };
                    let mut t = Vec::with_capacity(d2 * d2);
                    for j in 0..d2 {
                        for jp in 0..d2 {
                            t.push(pair_factor(infl, d, |e| e.get(k, kp, n), j, jp));
                        }
                    }
                    t
                })
                .collect()
        };
        Self {
            d2,
            diag_interior: diag(false),
            diag_edge: diag(true),
            pairs: [
                table(PairClass::Interior),
                table(PairClass::Start),
                table(PairClass::End),
                table(PairClass::EndStart),
            ],
        }
    }

    /// Self-interaction of point `k` on a path ending at `n_total`.
    pub fn diag(&self, k: usize, n_total: usize) -> &[Complex64] {
        if k == 0 || k == n_total {
            &self.diag_edge
        } else {
            &self.diag_interior
        }
    }

    pub fn pair(&self, k: usize, kp: usize, n_total: usize) -> &[Complex64] {
        let class = PairClass::of(k, kp, n_total);
        &self.pairs[class as usize][k - kp]
    }
}

pub(crate) fn unit_columns(d2: usize) -> Vec<Vec<Complex64>> {
    (0..d2)
        .map(|c| {
            let mut v = vec![Complex64::new(0.0, 0.0); d2];
            v[c] = Complex64::new(1.0, 0.0);
            v
        })
        .collect()
}

pub(crate) fn columns_to_maps(dt: f64, d2: usize, columns: &[Vec<Vec<Complex64>>], n: usize) -> AugmentedPropagatorSeries {
    let maps = (1..=n)
        .map(|k| CMatrix::from_fn(d2, d2, |r, c| columns[c][k][r]))
        .collect();
    AugmentedPropagatorSeries::new(dt, maps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AugmentedMethod {
    Quapi,
    Blip,
}

/// Exact `E(kΔt)` for `k = 1..=n` with the full influence functional.
pub fn build_augmented_propagator(
    fbu: &ForwardBackwardPropagatorSeries,
    baths: &[PathBath],
    beta: f64,
    n: usize,
    method: AugmentedMethod,
    args: &QuapiArgs,
) -> Result<AugmentedPropagatorSeries> {
    let infl = influences(baths, beta, fbu.dt, n)?;
    match method {
        AugmentedMethod::Quapi => build_augmented_propagator_quapi(fbu, &infl, n, args),
        AugmentedMethod::Blip => build_augmented_propagator_blip(fbu, &infl, n, args),
    }
}
