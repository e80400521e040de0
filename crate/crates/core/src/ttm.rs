//! Transfer tensor method: decompose a short series of dynamical maps into
//! memory kernels and use them to extrapolate to long times.

use crate::error::{Error, Result};
use crate::heom::{heom_augmented_propagators, HeomRequest};
use crate::linalg::CMatrix;
use crate::operator::{apply_propagator, AugmentedPropagatorSeries, DensityMatrix};
use crate::pathint::{build_augmented_propagator, AugmentedMethod, ForwardBackwardPropagatorSeries, PathBath, QuapiArgs};
use crate::trajectory::Trajectory;

/// Memory kernels `T_1..T_rmax` with `E_k = Σ_{m=1}^{min(k, rmax)} T_m E_{k−m}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferTensors {
    pub dt: f64,
    pub tensors: Vec<CMatrix>,
}

impl TransferTensors {
    pub fn rmax(&self) -> usize {
        self.tensors.len()
    }

    /// Extends `e` to `ntimes` maps. The first `rmax` maps are copied from the
    /// input untouched.
    pub fn extend(&self, e: &AugmentedPropagatorSeries, ntimes: usize) -> Result<AugmentedPropagatorSeries> {
        let rmax = self.rmax();
        if e.len() < rmax {
            return Err(Error::invalid(format!("{} maps supplied, rmax is {rmax}", e.len())));
        }
        let mut maps: Vec<CMatrix> = e.maps[..rmax.min(ntimes)].to_vec();
        let d2 = self.tensors[0].nrows();
        for k in rmax + 1..=ntimes {
            // k > rmax, so E_0 = identity never enters
            let mut ek = CMatrix::zeros(d2, d2);
            for (m, t) in self.tensors.iter().enumerate() {
                ek += t * &maps[k - m - 2];
            }
            maps.push(ek);
        }
        Ok(AugmentedPropagatorSeries::new(self.dt, maps))
    }
}

pub fn build_transfer_tensors(e: &AugmentedPropagatorSeries, rmax: usize) -> Result<TransferTensors> {
    if rmax == 0 {
        return Err(Error::invalid("rmax must be at least 1"));
    }
    if e.len() < rmax {
        return Err(Error::invalid(format!("{} maps supplied, rmax is {rmax}", e.len())));
    }
    let mut tensors: Vec<CMatrix> = Vec::with_capacity(rmax);
    for k in 1..=rmax {
        let mut t = e.maps[k - 1].clone();
        for m in 1..k {
            t -= &tensors[m - 1] * &e.maps[k - m - 1];
        }
        tensors.push(t);
    }
    Ok(TransferTensors { dt: e.dt, tensors })
}

/// Source of the exact maps the tensors are learned from.
#[derive(Clone, Debug)]
pub enum TtmBackend<'a> {
    Pathint {
        fbu: &'a ForwardBackwardPropagatorSeries,
        baths: &'a [PathBath],
        beta: f64,
        method: AugmentedMethod,
        args: QuapiArgs,
    },
    /// `req.ntimes` is overridden by `rmax`.
    Heom(&'a HeomRequest),
}

impl TtmBackend<'_> {
    fn maps(&self, rmax: usize) -> Result<AugmentedPropagatorSeries> {
        match self {
            Self::Pathint {
                fbu,
                baths,
                beta,
                method,
                args,
            } => build_augmented_propagator(fbu, baths, *beta, rmax, *method, args),
            Self::Heom(req) => {
                let mut req = (*req).clone();
                req.ntimes = rmax;
                heom_augmented_propagators(&req)
            }
        }
    }
}

/// Learns `rmax` transfer tensors from `backend` and propagates `rho0`.
pub fn propagate_ttm(backend: &TtmBackend, rho0: &DensityMatrix, ntimes: usize, rmax: usize) -> Result<Trajectory> {
    let e = backend.maps(rmax)?;
    propagate_ttm_from_maps(&e, rho0, ntimes, rmax)
}

pub fn propagate_ttm_from_maps(
    e: &AugmentedPropagatorSeries,
    rho0: &DensityMatrix,
    ntimes: usize,
    rmax: usize,
) -> Result<Trajectory> {
    let tensors = build_transfer_tensors(e, rmax)?;
    let all = tensors.extend(e, ntimes)?;
    apply_propagator(&all, rho0, e.dt, ntimes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::ExponentialCutoffSD;
    use crate::empirical::{propagate_bare, BarePropagateRequest, JumpOperator};
    use crate::linalg::{expm, kron, max_abs, c, ONE};
    use crate::pathint::{calculate_bare_propagators, propagate_quapi};
    use crate::{create_tls_hamiltonian, Operator};

    // row-major vec: vec(AρB) = (A ⊗ Bᵀ) vec(ρ)
    fn lindbladian(h: &Operator, jumps: &[Operator]) -> CMatrix {
        let d = h.dim();
        let id = CMatrix::identity(d, d);
        let hm = h.matrix();
        let mut g = (kron(hm, &id) - kron(&id, &hm.transpose())) * c(0.0, -1.0);
        for l in jumps {
            let lm = l.matrix();
            let ldl = lm.adjoint() * lm;
            g += kron(lm, &lm.map(|z| z.conj()));
            g -= (kron(&ldl, &id) + kron(&id, &ldl.transpose())) * c(0.5, 0.0);
        }
        g
    }

    fn lindblad_series(dt: f64, n: usize) -> (Operator, Operator, AugmentedPropagatorSeries) {
        let h = create_tls_hamiltonian(0.4, 1.0);
        let l = Operator::sigma_z().scaled(0.3);
        let e1 = expm(&(lindbladian(&h, std::slice::from_ref(&l)) * c(dt, 0.0)));
        let mut maps = vec![e1.clone()];
        for _ in 1..n {
            let next = &e1 * maps.last().unwrap();
            maps.push(next);
        }
        (h, l, AugmentedPropagatorSeries::new(dt, maps))
    }

    #[test]
    fn markovian_series_collapses_to_first_tensor() {
        let (h, l, e) = lindblad_series(0.1, 8);
        let t = build_transfer_tensors(&e, 8).unwrap();
        assert_eq!(t.tensors[0], e.maps[0]);
        for tk in &t.tensors[1..] {
            assert!(max_abs(tk) < 1e-10);
        }
        // long-time extrapolation against the master equation itself
        let rho0 = DensityMatrix::pure_state(2, 0);
        let ttm = propagate_ttm_from_maps(&e, &rho0, 300, 8).unwrap();
        let req = BarePropagateRequest::new(h, rho0, 0.1, 300).with_jumps(vec![JumpOperator::new(l)]);
        let direct = propagate_bare(&req).unwrap();
        assert!(ttm.max_deviation(&direct) < 1e-8, "{}", ttm.max_deviation(&direct));
    }

    #[test]
    fn single_tensor_is_first_map() {
        let (_, _, e) = lindblad_series(0.1, 3);
        let t = build_transfer_tensors(&e, 1).unwrap();
        assert_eq!(t.tensors, vec![e.maps[0].clone()]);
    }

    fn spin_boson_backend() -> (ForwardBackwardPropagatorSeries, Vec<PathBath>) {
        let fbu = calculate_bare_propagators(&create_tls_hamiltonian(0.0, 1.0), 0.25, 100, &[]).unwrap();
        let bath = PathBath::spin_boson(ExponentialCutoffSD::ohmic(0.1, 7.5).into());
        (fbu, vec![bath])
    }

    #[test]
    fn within_memory_maps_are_copied_bitwise() {
        let (fbu, baths) = spin_boson_backend();
        let backend = TtmBackend::Pathint {
            fbu: &fbu,
            baths: &baths,
            beta: 5.0,
            method: AugmentedMethod::Quapi,
            args: QuapiArgs::default(),
        };
        let e = backend.maps(5).unwrap();
        let t = build_transfer_tensors(&e, 5).unwrap();
        let ext = t.extend(&e, 40).unwrap();
        assert_eq!(&ext.maps[..5], &e.maps[..]);
        let rho0 = DensityMatrix::pure_state(2, 0);
        let a = propagate_ttm(&backend, &rho0, 5, 5).unwrap();
        let b = apply_propagator(&e, &rho0, 0.25, 5).unwrap();
        assert_eq!(a, b);
        // trace functional: Σ_i E[(i,i), (j,j)] = 1 and Σ_i E[(i,i), (j,k)] = 0
        for m in &ext.maps {
            for col in 0..4 {
                let tr = m[(0, col)] + m[(3, col)];
                let want = if col == 0 || col == 3 { ONE } else { c(0.0, 0.0) };
                assert!((tr - want).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn kernels_decay_and_match_iterative_quapi() {
        let (fbu, baths) = spin_boson_backend();
        let backend = TtmBackend::Pathint {
            fbu: &fbu,
            baths: &baths,
            beta: 5.0,
            method: AugmentedMethod::Quapi,
            args: QuapiArgs::default(),
        };
        let e = backend.maps(6).unwrap();
        let t = build_transfer_tensors(&e, 6).unwrap();
        let norms: Vec<f64> = t.tensors[1..].iter().map(|m| m.norm()).collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
        // TTM carries spurious memory from the truncated kernel sum, so it
        // converges in rmax more slowly than iterative QuAPI does in L
        let rho0 = DensityMatrix::pure_state(2, 0);
        let devs: Vec<f64> = [4, 6, 8]
            .iter()
            .map(|&r| {
                let e = backend.maps(r).unwrap();
                let ttm = propagate_ttm_from_maps(&e, &rho0, 100, r).unwrap();
                let quapi = propagate_quapi(&fbu, &baths, 5.0, &rho0, 100, r, &QuapiArgs::default()).unwrap();
                ttm.max_population_deviation(&quapi)
            })
            .collect();
        assert!(devs[1] < 1e-2, "{devs:?}");
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
    }
}
