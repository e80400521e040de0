//! Quantum-classical path integral over a harmonic solvent.
//!
//! Each Monte Carlo sample runs a classical bath trajectory from a thermally
//! sampled phase-space point. The bath is driven by the system coordinate of
//! an Ehrenfest reference, and the trajectory supplies time-dependent system
//! propagators. What classical trajectories miss (quantum thermal fluctuations,
//! and the response to path deviations from the reference within `kmax`
//! steps) is restored by a short-memory path sum.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::bath::{compute_eta_with, DiscreteBathModes, EtaCoefficients, SpectralDensity, ThermalWeight};
use crate::empirical::{check_dim, check_dt};
use crate::error::{Error, Result};
use crate::linalg::{conj_kron, to_row_major, unitary_propagator, CMatrix};
use crate::operator::{apply_propagator, AugmentedPropagatorSeries, DensityMatrix, Operator};
use crate::pathint::{prepare_tables, BathInfluence, Engine, ForwardBackwardPropagatorSeries, PointWeights, QuapiArgs};
use crate::trajectory::{from_flat_states, Trajectory};

// samples per deterministic reduction block
const BLOCK: usize = 16;

/// Initial-condition distribution of the harmonic modes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThermalSampling {
    /// Classical Boltzmann distribution: `⟨δx²⟩ = 1/(βω²)`, `⟨p²⟩ = 1/β`.
    #[default]
    Boltzmann,
    /// Wigner distribution of the thermal oscillator:
    /// `⟨δx²⟩ = coth(βω/2)/(2ω)`, `⟨p²⟩ = ω coth(βω/2)/2`.
    Wigner,
}

impl ThermalSampling {
    /// Fluctuation weight the path sum must still supply on top of the
    /// trajectories.
    fn residual_weight(self) -> ThermalWeight {
        match self {
            Self::Boltzmann => ThermalWeight::QuantumMinusClassical,
            Self::Wigner => ThermalWeight::ResponseOnly,
        }
    }

    /// Standard deviations of position and momentum for one mode.
    fn widths(self, beta: f64, omega: f64) -> (f64, f64) {
        match self {
            Self::Boltzmann => (1.0 / (omega * beta.sqrt()), 1.0 / beta.sqrt()),
            Self::Wigner => {
                let coth = 1.0 / (0.5 * beta * omega).tanh();
                ((0.5 * coth / omega).sqrt(), (0.5 * omega * coth).sqrt())
            }
        }
    }
}

/// A bath of harmonic modes with sampled initial conditions, coupled as
/// `−ŝ Σ_j c_j x_j` plus the counterterm.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicBathSolvent {
    pub beta: f64,
    pub modes: DiscreteBathModes,
    /// Eigenvalues of the (diagonal) coupling operator `ŝ`.
    pub svals: Vec<f64>,
    pub n_points: usize,
    pub seed: u64,
    /// Positions are sampled around `c_j s_init / ω_j²`.
    pub s_init: f64,
    pub sampling: ThermalSampling,
}

impl HarmonicBathSolvent {
    /// Displaced around the equilibrium of system state 0.
    pub fn new(beta: f64, modes: DiscreteBathModes, svals: Vec<f64>, n_points: usize, seed: u64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive and finite, got {beta}")));
        }
        if n_points == 0 {
            return Err(Error::invalid("n_points must be at least 1"));
        }
        if svals.is_empty() {
            return Err(Error::invalid("svals must not be empty"));
        }
        let s_init = svals[0];
        Ok(Self {
            beta,
            modes,
            svals,
            n_points,
            seed,
            s_init,
            sampling: ThermalSampling::Boltzmann,
        })
    }

    pub fn with_s_init(mut self, s_init: f64) -> Self {
        self.s_init = s_init;
        self
    }

    pub fn with_sampling(mut self, sampling: ThermalSampling) -> Self {
        self.sampling = sampling;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpacePoint {
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
}

/// Sample `index` of the solvent's ensemble, from its own RNG stream.
pub fn sample_point(solvent: &HarmonicBathSolvent, index: usize) -> PhaseSpacePoint {
    let mut rng = ChaCha12Rng::seed_from_u64(solvent.seed);
    rng.set_stream(index as u64);
    let mut positions = Vec::with_capacity(solvent.modes.len());
    let mut momenta = Vec::with_capacity(solvent.modes.len());
    for (&w, &c) in solvent.modes.omegas.iter().zip(&solvent.modes.couplings) {
        let (sx, sp) = solvent.sampling.widths(solvent.beta, w);
        let x = Normal::new(c * solvent.s_init / (w * w), sx).unwrap();
        let p = Normal::new(0.0, sp).unwrap();
        positions.push(x.sample(&mut rng));
        momenta.push(p.sample(&mut rng));
    }
    PhaseSpacePoint { positions, momenta }
}

pub fn sample_phase_space(solvent: &HarmonicBathSolvent) -> impl Iterator<Item = PhaseSpacePoint> + '_ {
    (0..solvent.n_points).map(move |i| sample_point(solvent, i))
}

/// Step propagators along one classical trajectory together with the
/// reference system coordinate `⟨ŝ⟩` at every time point.
#[derive(Clone, Debug)]
pub struct ReferencePath {
    pub fbu: ForwardBackwardPropagatorSeries,
    pub coordinate: Vec<f64>,
    /// `U(kΔt)` for `k = 1..=ntimes`.
    pub cumulative: Vec<CMatrix>,
}

struct Substeps {
    n: usize,
    h: f64,
}

fn substeps(classical_dt: f64, dt: f64) -> Result<Substeps> {
    check_dt(dt)?;
    if !(classical_dt > 0.0 && classical_dt <= dt) {
        return Err(Error::invalid(format!(
            "classical_dt must be in (0, dt], got {classical_dt}"
        )));
    }
    let n = (dt / classical_dt).round() as usize;
    if ((n as f64) * classical_dt - dt).abs() > 1e-9 * dt {
        return Err(Error::invalid("classical_dt must divide dt"));
    }
    Ok(Substeps { n, h: dt / n as f64 })
}

/// Evolves the bath from `point` alongside an Ehrenfest reference for the
/// system starting at `rho0`.
///
/// Each classical sub-step is a symmetric splitting: half a step of the
/// system under `H0 − X ŝ + μ ŝ²`, an exact driven-oscillator step with the
/// force frozen at the midpoint value of `⟨ŝ⟩`, then another system half
/// step with the updated `X = Σ c_j x_j`.
pub fn reference_path(
    h0: &Operator,
    solvent: &HarmonicBathSolvent,
    point: &PhaseSpacePoint,
    rho0: &DensityMatrix,
    classical_dt: f64,
    dt: f64,
    ntimes: usize,
) -> Result<ReferencePath> {
    let d = h0.dim();
    check_dim(d, rho0.dim())?;
    check_dim(d, solvent.svals.len())?;
    check_dim(solvent.modes.len(), point.positions.len())?;
    check_dim(solvent.modes.len(), point.momenta.len())?;
    if !h0.is_hermitian() {
        return Err(Error::NotHermitian("system Hamiltonian"));
    }
    let sub = substeps(classical_dt, dt)?;
    let s = &solvent.svals;
    let mu = solvent.modes.reorganization();
    let omegas = &solvent.modes.omegas;
    let cs = &solvent.modes.couplings;
    let rot: Vec<(f64, f64)> = omegas.iter().map(|&w| ((w * sub.h).cos(), (w * sub.h).sin())).collect();

    let mut x = point.positions.clone();
    let mut p = point.momenta.clone();
    let mut rho = rho0.matrix().clone();
    let expect = |rho: &CMatrix| -> f64 { (0..d).map(|i| rho[(i, i)].re * s[i]).sum() };
    let half = |big_x: f64| -> CMatrix {
        let mut h = h0.matrix().clone();
        for i in 0..d {
            h[(i, i)] += Complex64::new(-big_x * s[i] + mu * s[i] * s[i], 0.0);
        }
        unitary_propagator(&h, 0.5 * sub.h)
    };
    let collective = |x: &[f64]| -> f64 { x.iter().zip(cs).map(|(x, c)| x * c).sum() };

    let mut coordinate = Vec::with_capacity(ntimes + 1);
    coordinate.push(expect(&rho));
    let mut entries = Vec::with_capacity(ntimes);
    let mut cumulative = Vec::with_capacity(ntimes);
    let mut u_cum = CMatrix::identity(d, d);
    let mut u_half = half(collective(&x));
    for _ in 0..ntimes {
        let mut u_step = CMatrix::identity(d, d);
        for _ in 0..sub.n {
            let first = u_half.clone();
            rho = &first * &rho * first.adjoint();
            let s_mid = expect(&rho);
            for j in 0..x.len() {
                let (cw, sw) = rot[j];
                let w = omegas[j];
                let eq = cs[j] * s_mid / (w * w);
                let dx = x[j] - eq;
                x[j] = eq + dx * cw + p[j] / w * sw;
                p[j] = -w * dx * sw + p[j] * cw;
            }
            u_half = half(collective(&x));
            rho = &u_half * &rho * u_half.adjoint();
            u_step = &u_half * &first * u_step;
        }
        coordinate.push(expect(&rho));
        u_cum = &u_step * u_cum;
        cumulative.push(u_cum.clone());
        entries.push(conj_kron(&u_step));
    }
    Ok(ReferencePath {
        fbu: ForwardBackwardPropagatorSeries::new(dt, entries)?,
        coordinate,
        cumulative,
    })
}

/// Forward-backward reference propagators for one phase-space point.
pub fn calculate_reference_propagators(
    h0: &Operator,
    solvent: &HarmonicBathSolvent,
    point: &PhaseSpacePoint,
    rho0: &DensityMatrix,
    classical_dt: f64,
    dt: f64,
    ntimes: usize,
) -> Result<ForwardBackwardPropagatorSeries> {
    Ok(reference_path(h0, solvent, point, rho0, classical_dt, dt, ntimes)?.fbu)
}

/// Deterministic parallel sum over samples: blocks of `BLOCK` samples are
/// reduced in order, then the block sums are added in order.
fn ensemble_sum<T, F, A>(n: usize, per_sample: F, add: A) -> Result<T>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
    A: Fn(&mut T, T) + Sync,
{
    let blocks: Vec<T> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let mut acc = per_sample(lo)?;
            for i in lo + 1..(lo + BLOCK).min(n) {
                add(&mut acc, per_sample(i)?);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut it = blocks.into_iter();
    let mut total = it.next().expect("at least one sample");
    for b in it {
        add(&mut total, b);
    }
    Ok(total)
}

fn tag(index: usize) -> impl Fn(Error) -> Error {
    move |e| Error::SampleFailed {
        index,
        source: Box::new(e),
    }
}

/// Ensemble average of the cumulative reference propagators `E(kΔt)`.
pub fn calculate_average_reference_propagators(
    h0: &Operator,
    solvent: &HarmonicBathSolvent,
    rho0: &DensityMatrix,
    classical_dt: f64,
    dt: f64,
    ntimes: usize,
) -> Result<AugmentedPropagatorSeries> {
    let sum = ensemble_sum(
        solvent.n_points,
        |i| {
            let point = sample_point(solvent, i);
            let r = reference_path(h0, solvent, &point, rho0, classical_dt, dt, ntimes).map_err(tag(i))?;
            Ok(r.cumulative.iter().map(conj_kron).collect::<Vec<_>>())
        },
        |acc: &mut Vec<CMatrix>, v| acc.iter_mut().zip(v).for_each(|(a, b)| *a += b),
    )?;
    let inv = Complex64::new(1.0 / solvent.n_points as f64, 0.0);
    Ok(AugmentedPropagatorSeries::new(dt, sum.into_iter().map(|m| m * inv).collect()))
}

/// Ensemble-averaged classical path dynamics.
pub fn propagate_eacp(
    h0: &Operator,
    solvent: &HarmonicBathSolvent,
    rho0: &DensityMatrix,
    classical_dt: f64,
    dt: f64,
    ntimes: usize,
) -> Result<Trajectory> {
    let e = calculate_average_reference_propagators(h0, solvent, rho0, classical_dt, dt, ntimes)?;
    apply_propagator(&e, rho0, dt, ntimes)
}

/// Influence left for the path sum once classical trajectories are in place.
/// The real part holds whatever thermal fluctuations the sampling misses
/// (`coth(βω/2) − 2/(βω)` for Boltzmann, nothing for Wigner). The imaginary
/// part is the bath response without the counterterm, which the reference
/// Hamiltonian already contains.
pub fn residual_eta(
    sd: &SpectralDensity,
    beta: f64,
    dt: f64,
    kmax: usize,
    sampling: ThermalSampling,
) -> Result<EtaCoefficients> {
    let eta = compute_eta_with(sd, beta, dt, kmax, sampling.residual_weight())?;
    Ok(eta.without_counterterm(sd.reorganization()))
}

/// Phase factors that remove, within the memory window, the response to the
/// reference coordinate already present in the classical trajectory.
fn compensation(eta: &EtaCoefficients, svals: &[f64], coordinate: &[f64], kmax: usize) -> PointWeights {
    let d = svals.len();
    let ntimes = coordinate.len() - 1;
    let at = |k: usize, n_total: usize| -> Vec<Complex64> {
        let phase: f64 = (k.saturating_sub(kmax)..=k)
            .map(|kp| 2.0 * eta.get(k, kp, n_total).im * coordinate[kp])
            .sum();
        (0..d * d)
            .map(|j| {
                let ds = svals[j / d] - svals[j % d];
                Complex64::new(0.0, ds * phase).exp()
            })
            .collect()
    };
    PointWeights {
        interior: (0..=ntimes).map(|k| at(k, k + 1)).collect(),
        end: (0..=ntimes).map(|k| at(k, k.max(1))).collect(),
    }
}

/// QCPI with harmonic backreaction and quantum memory over `kmax` steps.
#[allow(clippy::too_many_arguments)]
pub fn propagate_qcpi(
    h0: &Operator,
    sd: &SpectralDensity,
    solvent: &HarmonicBathSolvent,
    rho0: &DensityMatrix,
    classical_dt: f64,
    dt: f64,
    ntimes: usize,
    kmax: usize,
    args: &QuapiArgs,
) -> Result<Trajectory> {
    let eta = residual_eta(sd, solvent.beta, dt, kmax.max(1), solvent.sampling)?;
    propagate_qcpi_with_eta(h0, &eta, solvent, rho0, classical_dt, dt, ntimes, kmax, args)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn propagate_qcpi_with_eta(
    h0: &Operator,
    eta: &EtaCoefficients,
    solvent: &HarmonicBathSolvent,
    rho0: &DensityMatrix,
    classical_dt: f64,
    dt: f64,
    ntimes: usize,
    kmax: usize,
    args: &QuapiArgs,
) -> Result<Trajectory> {
    let d = h0.dim();
    check_dim(d, rho0.dim())?;
    let infl = [BathInfluence {
        eta: eta.clone(),
        svec: solvent.svals.clone(),
    }];
    let tables = prepare_tables(d, &infl, kmax, args)?;
    let v0 = to_row_major(rho0.matrix());
    let sum = ensemble_sum(
        solvent.n_points,
        |i| {
            let point = sample_point(solvent, i);
            let r = reference_path(h0, solvent, &point, rho0, classical_dt, dt, ntimes).map_err(tag(i))?;
            let weights = compensation(eta, &solvent.svals, &r.coordinate, kmax);
            let engine = Engine {
                fbu: &r.fbu,
                tables: &tables,
                memory: kmax,
                args: *args,
                weights: Some(&weights),
            };
            engine.run(&v0, ntimes).map_err(tag(i))
        },
        |acc: &mut Vec<Vec<Complex64>>, v| {
            for (a, b) in acc.iter_mut().zip(v) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
        },
    )?;
    let inv = 1.0 / solvent.n_points as f64;
    let states: Vec<Vec<Complex64>> = sum
        .into_iter()
        .map(|v| v.into_iter().map(|z| z * inv).collect())
        .collect();
    Ok(from_flat_states(dt, d, &states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{discretize, ExponentialCutoffSD};
    use crate::linalg::max_abs;
    use crate::pathint::calculate_bare_propagators;
    use crate::{create_tls_hamiltonian, Complex64};

    fn solvent(xi: f64, n_modes: usize, n_points: usize) -> (SpectralDensity, HarmonicBathSolvent) {
        let sd: SpectralDensity = ExponentialCutoffSD::ohmic(xi, 7.5).into();
        let modes = if xi == 0.0 {
            DiscreteBathModes::new(vec![1.0; n_modes], vec![0.0; n_modes]).unwrap()
        } else {
            discretize(&sd, n_modes).unwrap()
        };
        (sd, HarmonicBathSolvent::new(5.0, modes, vec![1.0, -1.0], n_points, 11).unwrap())
    }

    fn one_mode(w: f64, c: f64, beta: f64, n: usize) -> HarmonicBathSolvent {
        let modes = DiscreteBathModes::new(vec![w], vec![c]).unwrap();
        HarmonicBathSolvent::new(beta, modes, vec![1.0, -1.0], n, 3).unwrap()
    }

    #[test]
    fn boltzmann_moments() {
        let (w, c) = (0.8, 0.5);
        let s = one_mode(w, c, 2.0, 100_000);
        let (xs, ps): (Vec<f64>, Vec<f64>) = sample_phase_space(&s).map(|p| (p.positions[0], p.momenta[0])).unzip();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let want = c * 1.0 / (w * w);
        assert!((mean - want).abs() < 3.0 * (var / n).sqrt(), "{mean} vs {want}");
        assert!((var - 1.0 / (2.0 * w * w)).abs() < 0.02 * var);
        let pvar = ps.iter().map(|p| p * p).sum::<f64>() / n;
        assert!((pvar - 0.5).abs() < 0.02);
    }

    #[test]
    fn frozen_bath_at_low_temperature() {
        let s = one_mode(1.0, 0.5, 1e8, 50);
        for p in sample_phase_space(&s) {
            assert!((p.positions[0] - 0.5).abs() < 1e-3 && p.momenta[0].abs() < 1e-3);
        }
    }

    #[test]
    fn wigner_widths_include_zero_point() {
        let s = one_mode(2.0, 0.0, 1e8, 20_000).with_sampling(ThermalSampling::Wigner);
        let var = sample_phase_space(&s).map(|p| p.positions[0].powi(2)).sum::<f64>() / 20_000.0;
        assert!((var - 0.25).abs() < 0.01, "{var}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let (_, s) = solvent(0.1, 10, 5);
        let a: Vec<_> = sample_phase_space(&s).collect();
        let b: Vec<_> = sample_phase_space(&s).collect();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn undriven_reference_is_bare() {
        let (_, s) = solvent(0.0, 4, 1);
        let h = create_tls_hamiltonian(1.0, 1.0);
        let p = sample_point(&s, 0);
        let rho0 = DensityMatrix::pure_state(2, 0);
        let r = calculate_reference_propagators(&h, &s, &p, &rho0, 0.025, 0.25, 20).unwrap();
        let bare = calculate_bare_propagators(&h, 0.25, 20, &[]).unwrap();
        for (a, b) in r.entries.iter().zip(&bare.entries) {
            assert!(max_abs(&(a - b)) < 1e-12);
        }
    }

    #[test]
    fn frozen_system_phase_matches_driven_oscillator() {
        // Ω = 0 keeps the system in state 0, so the mode is a displaced
        // oscillator and each level accumulates the closed-form action
        let (w, c, eps) = (0.7, 0.4, 0.3);
        let s = one_mode(w, c, 1.0, 1);
        let p = sample_point(&s, 0);
        let (x0, p0) = (p.positions[0], p.momenta[0]);
        let h = create_tls_hamiltonian(eps, 0.0);
        let (dt, n) = (0.2, 10);
        let r = reference_path(&h, &s, &p, &DensityMatrix::pure_state(2, 0), dt / 1000.0, dt, n).unwrap();
        let eq = c / (w * w);
        let mu = c * c / (2.0 * w * w);
        for k in 1..=n {
            let t = k as f64 * dt;
            let int_x = eq * t + (x0 - eq) * (w * t).sin() / w + p0 * (1.0 - (w * t).cos()) / (w * w);
            for (i, si) in [(0, 1.0), (1, -1.0)] {
                let e = if i == 0 { eps } else { -eps };
                let phase = -(e * t - si * c * int_x + mu * t);
                let want = Complex64::new(0.0, phase).exp();
                assert!((r.cumulative[k - 1][(i, i)] - want).norm() < 1e-8, "k {k} level {i}");
            }
            assert!((r.coordinate[k] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn classical_substeps_converge() {
        let (_, s) = solvent(0.1, 20, 1);
        let h = create_tls_hamiltonian(1.0, 1.0);
        let p = sample_point(&s, 0);
        let rho0 = DensityMatrix::pure_state(2, 0);
        let run = |m: f64| calculate_reference_propagators(&h, &s, &p, &rho0, 0.25 / m, 0.25, 40).unwrap();
        let (a, b, c) = (run(25.0), run(50.0), run(100.0));
        let diff = |x: &ForwardBackwardPropagatorSeries, y: &ForwardBackwardPropagatorSeries| {
            x.entries.iter().zip(&y.entries).fold(0.0f64, |m, (u, v)| m.max(max_abs(&(u - v))))
        };
        let (e1, e2) = (diff(&a, &b), diff(&b, &c));
        // second-order splitting: halving the substep quarters the error
        assert!(e2 < 1e-4 && e1 / e2 > 3.0, "{e1} {e2}");
        assert!(calculate_reference_propagators(&h, &s, &p, &rho0, 0.1, 0.25, 4).is_err());
    }

    #[test]
    fn zero_coupling_gives_bare_dynamics() {
        let (sd, s) = solvent(0.0, 4, 8);
        let h = create_tls_hamiltonian(1.0, 1.0);
        let rho0 = DensityMatrix::pure_state(2, 0);
        let bare = calculate_bare_propagators(&h, 0.25, 30, &[]).unwrap();
        let want = apply_propagator(&bare.cumulative(), &rho0, 0.25, 30).unwrap();
        let e = propagate_eacp(&h, &s, &rho0, 0.025, 0.25, 30).unwrap();
        let q = propagate_qcpi(&h, &sd, &s, &rho0, 0.025, 0.25, 30, 3, &QuapiArgs::default()).unwrap();
        assert!(e.max_deviation(&want) < 1e-12);
        assert!(q.max_deviation(&want) < 1e-12);
    }

    #[test]
    fn disabled_residual_reduces_qcpi_to_eacp() {
        let (_, s) = solvent(0.1, 20, 24);
        let h = create_tls_hamiltonian(1.0, 1.0);
        let rho0 = DensityMatrix::pure_state(2, 0);
        let e = propagate_eacp(&h, &s, &rho0, 0.025, 0.25, 20).unwrap();
        let zero = EtaCoefficients::zero(0.25, 3);
        let q = propagate_qcpi_with_eta(&h, &zero, &s, &rho0, 0.025, 0.25, 20, 3, &QuapiArgs::default()).unwrap();
        assert!(q.max_deviation(&e) < 1e-12);
    }

    #[test]
    fn trace_is_preserved_and_runs_are_reproducible() {
        let (sd, s) = solvent(0.1, 20, 20);
        let h = create_tls_hamiltonian(1.0, 1.0);
        let rho0 = DensityMatrix::pure_state(2, 0);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| propagate_qcpi(&h, &sd, &s, &rho0, 0.025, 0.25, 20, 3, &QuapiArgs::default()).unwrap())
        };
        let a = run(1);
        for r in a.states() {
            assert!((r.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        }
        assert_eq!(a, run(3));
        assert_eq!(a, run(1));
    }

    #[test]
    fn sample_errors_carry_the_index() {
        let (sd, s) = solvent(0.1, 5, 3);
        let h = Operator::identity(3);
        let rho0 = DensityMatrix::pure_state(3, 0);
        let err = propagate_qcpi(&h, &sd, &s, &rho0, 0.025, 0.25, 5, 2, &QuapiArgs::default()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. } | Error::SampleFailed { .. }));
    }
}
