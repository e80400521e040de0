//! Bloch-Redfield master equation in the eigenbasis of the system Hamiltonian,
//! without the secular approximation.

use num_complex::Complex64;

use crate::bath::SpectralDensity;
use crate::empirical::{check_dim, check_dt};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::linalg::{from_row_major, hermitian_eigen, to_row_major, CMatrix, I, ZERO};
use crate::operator::{DensityMatrix, Operator};
use crate::trajectory::{time_grid, Trajectory};

/// Bath spectrum entering the tensor, the Fourier transform of the bath
/// correlation function: `S(ω) = J(ω)(coth(βω/2) + 1)` for `ω > 0` and
/// `S(−ω) = e^{−βω} S(ω)`. The Lamb-shift (principal value) part is dropped.
pub fn bath_spectrum(sd: &SpectralDensity, beta: f64, omega: f64) -> f64 {
    let x = 0.5 * beta * omega.abs();
    if omega == 0.0 {
        // J(ω) coth(βω/2) → 2 J'(0)/β
        return 2.0 * sd.j_over_omega(0.0) / beta;
    }
    let j = sd.evaluate(omega.abs());
    if omega > 0.0 {
        j * (1.0 / x.tanh() + 1.0)
    } else if x > 350.0 {
        0.0
    } else {
        j * (1.0 / x.tanh() - 1.0)
    }
}

/// `R_abcd` together with the eigenbasis it is expressed in.
#[derive(Clone, Debug, PartialEq)]
pub struct RedfieldTensor {
    dim: usize,
    entries: Vec<Complex64>,
    energies: Vec<f64>,
    basis: CMatrix,
}

impl RedfieldTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> Complex64 {
        let n = self.dim;
        self.entries[((a * n + b) * n + c) * n + d]
    }

    /// System eigenvalues `E_a`, ascending.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `ω_ab = E_a − E_b`.
    pub fn frequency(&self, a: usize, b: usize) -> f64 {
        self.energies[a] - self.energies[b]
    }

    /// Eigenvectors as columns.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Generator `G` with `d vec(ρ)/dt = G vec(ρ)` in the eigenbasis.
    pub fn generator(&self) -> CMatrix {
        let n = self.dim;
        let mut g = CMatrix::zeros(n * n, n * n);
        for a in 0..n {
            for b in 0..n {
                let row = a * n + b;
                for col in 0..n * n {
                    g[(row, col)] = self.entries[row * n * n + col];
                }
                g[(row, row)] += -I * self.frequency(a, b);
            }
        }
        g
    }
}

pub fn build_redfield_tensor(h0: &Operator, baths: &[(SpectralDensity, Operator)], beta: f64) -> Result<RedfieldTensor> {
    if !h0.is_hermitian() {
        return Err(Error::NotHermitian("system Hamiltonian"));
    }
    let (energies, basis) = hermitian_eigen(h0.matrix());
    build_in_basis(energies, basis, baths, beta)
}

pub(crate) fn build_in_basis(
    energies: Vec<f64>,
    basis: CMatrix,
    baths: &[(SpectralDensity, Operator)],
    beta: f64,
) -> Result<RedfieldTensor> {
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let n = energies.len();
    let mut r = vec![ZERO; n.pow(4)];
    for (sd, op) in baths {
        sd.validate()?;
        check_dim(n, op.dim())?;
        if !op.is_hermitian() {
            return Err(Error::NotHermitian("bath coupling operator"));
        }
        let s = basis.adjoint() * op.matrix() * &basis;
        let spec = |x: usize, y: usize| bath_spectrum(sd, beta, energies[x] - energies[y]);
        // Σ_n s_xn s_ny S(E_y − E_n)
        let mut gamma = CMatrix::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                gamma[(x, y)] = (0..n).map(|m| s[(x, m)] * s[(m, y)] * spec(y, m)).sum();
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut v = -s[(a, c)] * s[(d, b)] * (spec(c, a) + spec(d, b));
                        if b == d {
                            v += gamma[(a, c)];
                        }
                        if a == c {
                            v += gamma[(b, d)].conj();
                        }
                        r[((a * n + b) * n + c) * n + d] += -0.5 * v;
                    }
                }
            }
        }
    }
    Ok(RedfieldTensor {
        dim: n,
        entries: r,
        energies,
        basis,
    })
}

pub fn propagate_brme(
    h0: &Operator,
    baths: &[(SpectralDensity, Operator)],
    beta: f64,
    rho0: &DensityMatrix,
    dt: f64,
    ntimes: usize,
) -> Result<Trajectory> {
    let tensor = build_redfield_tensor(h0, baths, beta)?;
    propagate_tensor(&tensor, rho0, dt, ntimes, &IntegratorConfig::default())
}

/// Integrates the master equation defined by a prebuilt tensor.
pub fn propagate_tensor(
    tensor: &RedfieldTensor,
    rho0: &DensityMatrix,
    dt: f64,
    ntimes: usize,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_dt(dt)?;
    let n = tensor.dim();
    check_dim(n, rho0.dim())?;
    let v = tensor.basis();
    let g = to_row_major(&tensor.generator());
    let nn = n * n;
    let rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        for (i, out) in dy.iter_mut().enumerate() {
            let row = &g[i * nn..(i + 1) * nn];
            *out = row.iter().zip(y).map(|(a, b)| a * b).sum();
        }
    };
    let y0 = to_row_major(&(v.adjoint() * rho0.matrix() * v));
    let states = integrate(rhs, &y0, &time_grid(dt, ntimes), cfg)?;
    let states = states
        .iter()
        .map(|s| DensityMatrix::from_matrix_unchecked(v * from_row_major(n, s) * v.adjoint()))
        .collect();
    Ok(Trajectory::uniform(dt, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::ExponentialCutoffSD;
    use crate::empirical::{propagate_bare, BarePropagateRequest};
    use crate::linalg::c;
    use proptest::prelude::*;

    fn h_rabi() -> Operator {
        Operator::from_real_rows(2, &[0.0, -1.0, -1.0, 0.0]).unwrap()
    }

    fn ohmic_baths() -> Vec<(SpectralDensity, Operator)> {
        vec![(ExponentialCutoffSD::ohmic(0.1, 7.5).into(), Operator::sigma_z())]
    }

    #[test]
    fn zero_coupling_is_bare() {
        let baths = vec![(ExponentialCutoffSD::ohmic(0.0, 7.5).into(), Operator::sigma_z())];
        let t = build_redfield_tensor(&h_rabi(), &baths, 5.0).unwrap();
        assert!(t.entries.iter().all(|z| z.norm() == 0.0));
        let rho0 = DensityMatrix::pure_state(2, 0);
        let a = propagate_brme(&h_rabi(), &baths, 5.0, &rho0, 0.25, 100).unwrap();
        let b = propagate_bare(&BarePropagateRequest::new(h_rabi(), rho0, 0.25, 100)).unwrap();
        assert!(a.max_deviation(&b) < 1e-9);
    }

    #[test]
    fn relaxes_to_thermal_populations() {
        let beta = 5.0;
        let rho0 = DensityMatrix::pure_state(2, 0);
        let traj = propagate_brme(&h_rabi(), &ohmic_baths(), beta, &rho0, 0.25, 400).unwrap();
        let t = build_redfield_tensor(&h_rabi(), &ohmic_baths(), beta).unwrap();
        let v = t.basis();
        let last = traj.states().last().unwrap();
        let eig = v.adjoint() * last.matrix() * v;
        let ratio = eig[(1, 1)].re / eig[(0, 0)].re;
        let want = (-beta * (t.energies()[1] - t.energies()[0])).exp();
        assert!((ratio - want).abs() < 1e-3 * want.max(1e-6) + 1e-6, "{ratio} vs {want}");
        for rho in traj.states() {
            assert!((rho.trace().re - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn commuting_coupling_is_pure_dephasing() {
        let h = Operator::from_real_rows(2, &[1.0, 0.0, 0.0, -1.0]).unwrap();
        let rho0 = DensityMatrix::from_real_rows(2, &[0.3, 0.4, 0.4, 0.7]).unwrap();
        let traj = propagate_brme(&h, &ohmic_baths(), 5.0, &rho0, 0.25, 60).unwrap();
        for rho in traj.states() {
            assert!((rho.population(0) - 0.3).abs() < 1e-10);
        }
        assert!(traj.states().last().unwrap()[(0, 1)].norm() < 0.4);
    }

    #[test]
    fn site_output_is_independent_of_eigenvector_phases() {
        let h = Operator::from_real_rows(3, &[0.0, -1.0, 0.2, -1.0, 0.5, -0.7, 0.2, -0.7, -0.3]).unwrap();
        let baths = vec![
            (ExponentialCutoffSD::ohmic(0.1, 7.5).into(), Operator::projector(3, 0)),
            (ExponentialCutoffSD::ohmic(0.2, 3.0).into(), Operator::projector(3, 2)),
        ];
        let (e, v) = hermitian_eigen(h.matrix());
        let mut v2 = v.clone();
        for (j, ph) in [0.3, -1.1, 2.0].iter().enumerate() {
            let z = (I * *ph).exp();
            for i in 0..3 {
                v2[(i, j)] *= z;
            }
        }
        let rho0 = DensityMatrix::pure_state(3, 0);
        let cfg = IntegratorConfig::default();
        let a = propagate_tensor(&build_in_basis(e.clone(), v, &baths, 2.0).unwrap(), &rho0, 0.2, 50, &cfg).unwrap();
        let b = propagate_tensor(&build_in_basis(e, v2, &baths, 2.0).unwrap(), &rho0, 0.2, 50, &cfg).unwrap();
        assert!(a.max_deviation(&b) < 1e-10);
    }

    #[test]
    fn emission_rate_matches_golden_rule() {
        // H = (Δ/2)σz, s = σx: Fermi's golden rule for a bath coupling Σ c_j x_j
        // gives k↓ = 2 J(Δ)(n̄ + 1) with the Bose occupation n̄
        let (delta, beta) = (1.3, 2.0);
        let sd: SpectralDensity = ExponentialCutoffSD::ohmic(0.05, 4.0).into();
        let h = Operator::from_real_rows(2, &[0.5 * delta, 0.0, 0.0, -0.5 * delta]).unwrap();
        let t = build_redfield_tensor(&h, &[(sd.clone(), Operator::sigma_x())], beta).unwrap();
        // eigenvalues ascending: state 1 is the upper level
        let g = t.generator();
        let nbar = 1.0 / ((beta * delta).exp() - 1.0);
        let down = 2.0 * sd.evaluate(delta) * (nbar + 1.0);
        let up = 2.0 * sd.evaluate(delta) * nbar;
        assert!((g[(3, 3)].re + down).abs() < 1e-12 * down);
        assert!((g[(0, 3)].re - down).abs() < 1e-12 * down);
        assert!((g[(3, 0)].re - up).abs() < 1e-12 * down);
    }

    #[test]
    fn detailed_balance_of_spectrum() {
        let sd: SpectralDensity = ExponentialCutoffSD::ohmic(0.1, 7.5).into();
        for w in [0.1, 1.0, 3.0] {
            let r = bath_spectrum(&sd, 5.0, -w) / bath_spectrum(&sd, 5.0, w);
            assert!((r - (-5.0 * w).exp()).abs() < 1e-12);
        }
        let s0 = bath_spectrum(&sd, 5.0, 0.0);
        assert!((bath_spectrum(&sd, 5.0, 1e-7) - s0).abs() < 1e-6 * s0);
    }

    fn random_rho(n: usize, vals: &[f64]) -> CMatrix {
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = c(vals[2 * (i * n + j)], vals[2 * (i * n + j) + 1]);
            }
        }
        let m = &a * a.adjoint();
        let tr = m.trace();
        m / tr
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn generator_preserves_trace_and_hermiticity(
            hv in proptest::collection::vec(-1.0f64..1.0, 6),
            rv in proptest::collection::vec(-1.0f64..1.0, 18),
            beta in 0.2f64..10.0,
        ) {
            let h = Operator::from_real_rows(3, &[hv[0], hv[1], hv[2], hv[1], hv[3], hv[4], hv[2], hv[4], hv[5]]).unwrap();
            let baths = vec![
                (ExponentialCutoffSD::ohmic(0.3, 2.0).into(), Operator::projector(3, 0)),
                (ExponentialCutoffSD::ohmic(0.1, 5.0).into(), Operator::from_real_rows(3, &[1.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, -1.0]).unwrap()),
            ];
            let t = build_redfield_tensor(&h, &baths, beta).unwrap();
            let rho = random_rho(3, &rv);
            let y = crate::linalg::vectorize(&(t.basis().adjoint() * &rho * t.basis()));
            let dy = t.generator() * y;
            let dm = crate::linalg::unvectorize(&dy, 3);
            prop_assert!(dm.trace().norm() < 1e-12);
            prop_assert!(crate::linalg::max_abs(&(&dm - dm.adjoint())) < 1e-12);
        }
    }
}
