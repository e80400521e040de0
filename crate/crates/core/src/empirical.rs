//! Isolated systems, optionally non-Hermitian or field-driven, and Lindblad
//! master equations.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::linalg::{c, to_row_major, I, ZERO};
use crate::operator::{hamiltonian_at, DensityMatrix, ExternalField, Operator};
use crate::trajectory::{from_flat_states, time_grid, Trajectory};

/// A Lindblad jump operator, including its rate prefactor.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpOperator {
    op: Operator,
}

impl JumpOperator {
    pub fn new(op: Operator) -> Self {
        Self { op }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }
}

impl From<Operator> for JumpOperator {
    fn from(op: Operator) -> Self {
        Self::new(op)
    }
}

#[derive(Clone, Debug)]
pub struct BarePropagateRequest {
    pub hamiltonian: Operator,
    pub rho0: DensityMatrix,
    pub dt: f64,
    pub ntimes: usize,
    pub external_fields: Vec<ExternalField>,
    pub jump_ops: Vec<JumpOperator>,
    pub integrator: IntegratorConfig,
}

impl BarePropagateRequest {
    pub fn new(hamiltonian: Operator, rho0: DensityMatrix, dt: f64, ntimes: usize) -> Self {
        Self {
            hamiltonian,
            rho0,
            dt,
            ntimes,
            external_fields: Vec::new(),
            jump_ops: Vec::new(),
            integrator: IntegratorConfig::default(),
        }
    }

    pub fn with_fields(mut self, fields: Vec<ExternalField>) -> Self {
        self.external_fields = fields;
        self
    }

    pub fn with_jumps(mut self, jumps: Vec<JumpOperator>) -> Self {
        self.jump_ops = jumps;
        self
    }
}

pub(crate) fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("dt must be positive, got {dt}")))
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Integrates `dρ/dt = −i(Hρ − ρH†) + Σ_j (L_j ρ L_j† − ½{L_j†L_j, ρ})`.
///
/// Without jump operators `H` may be non-Hermitian; with them it must be
/// Hermitian. Fields add `V(t)·O` to `H`.
pub fn propagate_bare(req: &BarePropagateRequest) -> Result<Trajectory> {
    check_dt(req.dt)?;
    let d = req.hamiltonian.dim();
    check_dim(d, req.rho0.dim())?;
    for f in &req.external_fields {
        check_dim(d, f.coupling_op().dim())?;
    }
    for j in &req.jump_ops {
        check_dim(d, j.op().dim())?;
    }
    if !req.jump_ops.is_empty() && !req.hamiltonian.is_hermitian() {
        return Err(Error::NotHermitian("Hamiltonian of a Lindblad master equation"));
    }

    // H_eff = H − (i/2) Σ L†L folds the anticommutator into the commutator.
    let mut k_sum = crate::linalg::CMatrix::zeros(d, d);
    for j in &req.jump_ops {
        let l = j.op().matrix();
        k_sum += l.adjoint() * l;
    }
    let h_static = req.hamiltonian.matrix() - k_sum * c(0.0, 0.5);
    let jumps: Vec<(Vec<Complex64>, Vec<Complex64>)> = req
        .jump_ops
        .iter()
        .map(|j| (to_row_major(j.op().matrix()), to_row_major(&j.op().matrix().adjoint())))
        .collect();
    let h_static_rm = to_row_major(&h_static);
    let fields = &req.external_fields;

    let mut h_t = h_static_rm.clone();
    let mut tmp = vec![ZERO; d * d];
    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let h: &[Complex64] = if fields.is_empty() {
            &h_static_rm
        } else {
            let m = hamiltonian_at(&h_static, fields, t);
            h_t.copy_from_slice(&to_row_major(&m));
            &h_t
        };
        // −i(Hρ − ρH†)
        for i in 0..d {
            for j in 0..d {
                let mut acc = ZERO;
                for k in 0..d {
                    acc += h[i * d + k] * y[k * d + j] - y[i * d + k] * h[j * d + k].conj();
                }
                dy[i * d + j] = -I * acc;
            }
        }
        for (l, ld) in &jumps {
            // tmp = ρ L†, dy += L tmp
            crate::linalg::matmul_into(d, y, ld, &mut tmp);
            for i in 0..d {
                for k in 0..d {
                    let lik = l[i * d + k];
                    if lik == ZERO {
                        continue;
                    }
                    for j in 0..d {
                        dy[i * d + j] += lik * tmp[k * d + j];
                    }
                }
            }
        }
    };
    let y0 = to_row_major(req.rho0.matrix());
    let states = integrate(rhs, &y0, &time_grid(req.dt, req.ntimes), &req.integrator)?;
    Ok(from_flat_states(req.dt, d, &states))
}

/// Hamiltonian of two coupled two-level molecules in the full four-state
/// space `{ee, eg, ge, gg}`.
pub fn dimer_hamiltonian() -> Operator {
    #[rustfmt::skip]
    let rows = [
        20.0, 0.0, 0.0, 0.0,
        0.0, 10.0, -1.0, 0.0,
        0.0, -1.0, 10.0, 0.0,
        0.0, 0.0, 0.0, 0.0,
    ];
    Operator::from_real_rows(4, &rows).unwrap()
}

/// Index of the doubly de-excited state in [`dimer_hamiltonian`].
pub const DIMER_GROUND: usize = 3;

/// Excitation transfer in a dimer with vibrational dephasing of strength `bo`
/// and spontaneous emission of strength `se`, from `|ge⟩⟨ge|` for 100 steps of 0.125.
pub fn propagate_dimer_emission(bo: f64, se: f64) -> Result<Trajectory> {
    if !(bo >= 0.0 && se >= 0.0) {
        return Err(Error::invalid("dimer rates must be non-negative"));
    }
    let id = Operator::identity(2);
    let sz = Operator::sigma_z().scaled(bo);
    let sm = Operator::sigma_m().scaled(se);
    let jumps = vec![sz.kron(&id), id.kron(&sz), sm.kron(&id), id.kron(&sm)]
        .into_iter()
        .map(JumpOperator::new)
        .collect();
    let req = BarePropagateRequest::new(dimer_hamiltonian(), DensityMatrix::pure_state(4, 1), 0.125, 100).with_jumps(jumps);
    propagate_bare(&req)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;

    fn rabi_request() -> BarePropagateRequest {
        BarePropagateRequest::new(
            Operator::from_real_rows(2, &[0.0, -1.0, -1.0, 0.0]).unwrap(),
            DensityMatrix::pure_state(2, 0),
            0.125,
            100,
        )
    }

    #[test]
    fn rabi_oscillation() {
        let traj = propagate_bare(&rabi_request()).unwrap();
        assert_eq!(traj.len(), 101);
        for (t, rho) in traj.iter() {
            assert!((rho.population(0) - t.cos().powi(2)).abs() < 1e-8);
            assert!((rho.purity() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn lossy_trace_decreases() {
        let h = Operator::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, -0.1), c(-1.0, 0.0), c(-1.0, 0.0), c(0.0, -0.5)],
        ))
        .unwrap();
        let traj = propagate_bare(&BarePropagateRequest::new(h, DensityMatrix::pure_state(2, 0), 0.125, 100)).unwrap();
        let tr: Vec<f64> = traj.states().iter().map(|r| r.trace().re).collect();
        assert!(tr.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn pure_dephasing() {
        let plus = DensityMatrix::from_real_rows(2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let req = BarePropagateRequest::new(Operator::zeros(2), plus, 0.125, 100)
            .with_jumps(vec![Operator::sigma_z().into()]);
        let traj = propagate_bare(&req).unwrap();
        for (t, rho) in traj.iter() {
            assert!((rho[(0, 1)] - c(0.5 * (-2.0 * t).exp(), 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn zero_field_is_bit_identical() {
        let base = propagate_bare(&rabi_request()).unwrap();
        let field = ExternalField::new(|_| 0.0, Operator::sigma_z()).unwrap();
        let with = propagate_bare(&rabi_request().with_fields(vec![field])).unwrap();
        assert_eq!(base, with);
    }

    #[test]
    fn driven_field_changes_dynamics() {
        let field = ExternalField::new(|t| 12.0 * (10.0 * t).cos(), Operator::sigma_z()).unwrap();
        let base = propagate_bare(&rabi_request()).unwrap();
        let with = propagate_bare(&rabi_request().with_fields(vec![field])).unwrap();
        assert!(base.max_population_deviation(&with) > 0.1);
    }

    #[test]
    fn dimer_without_emission_conserves_excitations() {
        let traj = propagate_dimer_emission(0.7, 0.0).unwrap();
        for rho in traj.states() {
            assert!(rho.population(DIMER_GROUND).abs() < 1e-10);
        }
    }

    #[test]
    fn dimer_with_emission_fills_ground_state() {
        let p = propagate_dimer_emission(0.7, 0.25).unwrap().populations(DIMER_GROUND);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn closed_dimer_beats_between_single_excitations() {
        let traj = propagate_dimer_emission(0.0, 0.0).unwrap();
        // |ge⟩ ↔ |eg⟩ with coupling −1 is a Rabi problem: P_ge = cos²t
        for (t, rho) in traj.iter() {
            assert!((rho.population(1) - t.cos().powi(2)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_lindblad_with_non_hermitian_h() {
        let h = Operator::new(CMatrix::from_row_slice(2, 2, &[c(0.0, -1.0), ZERO, ZERO, ZERO])).unwrap();
        let req = BarePropagateRequest::new(h, DensityMatrix::pure_state(2, 0), 0.1, 2)
            .with_jumps(vec![Operator::sigma_z().into()]);
        assert!(matches!(propagate_bare(&req), Err(Error::NotHermitian(_))));
        let req = BarePropagateRequest::new(Operator::zeros(3), DensityMatrix::pure_state(2, 0), 0.1, 2);
        assert!(matches!(propagate_bare(&req), Err(Error::DimensionMismatch { .. })));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn lindblad_invariants(
            h in proptest::collection::vec(-1.0f64..1.0, 4),
            rate in 0.0f64..1.0,
            amp in 0.0f64..1.0,
        ) {
            let hm = Operator::from_real_rows(2, &[h[0], h[1], h[1], h[2]]).unwrap();
            let rho0 = DensityMatrix::from_real_rows(2, &[0.7, 0.3, 0.3, 0.3]).unwrap();
            let jumps = vec![Operator::sigma_m().scaled(rate).into(), Operator::sigma_x().scaled(h[3].abs()).into()];
            let field = ExternalField::new(move |t| amp * t.sin(), Operator::sigma_z()).unwrap();
            let req = BarePropagateRequest::new(hm, rho0, 0.2, 40).with_jumps(jumps).with_fields(vec![field]);
            let traj = propagate_bare(&req).unwrap();
            for rho in traj.states() {
                proptest::prop_assert!((rho.trace().re - 1.0).abs() < 1e-8);
                proptest::prop_assert!(rho.hermiticity_error() < 1e-10);
                proptest::prop_assert!(rho.eigenvalues()[0] > -1e-8);
            }
        }
    }
}
