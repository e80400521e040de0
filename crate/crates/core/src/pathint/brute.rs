use num_complex::Complex64;
use rayon::prelude::*;

use super::{check_budget, check_svecs, BathInfluence, ForwardBackwardPropagatorSeries};
use crate::empirical::check_dim;
use crate::error::{Error, Result};
use crate::linalg::{from_row_major, to_row_major, ZERO};
use crate::operator::DensityMatrix;

const BLOCK: usize = 1 << 12;

/// `ρ(NΔt)` summed explicitly over all `d^{2(N+1)}` forward-backward paths.
pub fn brute_force_path_sum(
    fbu: &ForwardBackwardPropagatorSeries,
    infl: &[BathInfluence],
    rho0: &DensityMatrix,
    n: usize,
    max_elements: u128,
) -> Result<DensityMatrix> {
    let d = fbu.system_dim();
    check_dim(d, rho0.dim())?;
    check_svecs(d, infl)?;
    if fbu.len() < n {
        return Err(Error::invalid(format!("{} propagators supplied for {n} steps", fbu.len())));
    }
    if infl.iter().any(|b| b.eta.max_lag() < n) {
        return Err(Error::invalid("eta table shorter than the path"));
    }
    let d2 = d * d;
    check_budget(d2, n + 1, max_elements)?;
    let v0 = to_row_major(rho0.matrix());
    let total = d2.pow(n as u32 + 1);

    // ln of the influence functional for one path, directly from the η table
    let log_f = |path: &[usize]| -> Complex64 {
        let mut acc = ZERO;
        for b in infl {
            let s = &b.svec;
            for k in 0..=n {
                let ds = s[path[k] / d] - s[path[k] % d];
                if ds == 0.0 {
                    continue;
                }
                for kp in 0..=k {
                    let eta = b.eta.get(k, kp, n);
                    acc -= ds * (eta * s[path[kp] / d] - eta.conj() * s[path[kp] % d]);
                }
            }
        }
        acc
    };

    let blocks: Vec<Vec<Complex64>> = (0..total.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![ZERO; d2];
            let mut path = vec![0usize; n + 1];
            for idx in b * BLOCK..((b + 1) * BLOCK).min(total) {
                // path[0] is the most significant digit
                let mut r = idx;
                for k in (0..=n).rev() {
                    path[k] = r % d2;
                    r /= d2;
                }
                let mut amp = v0[path[0]];
                if amp == ZERO {
                    continue;
                }
                for k in 0..n {
                    amp *= fbu.entries[k][(path[k + 1], path[k])];
                }
                if amp == ZERO {
                    continue;
                }
                acc[path[n]] += amp * log_f(&path).exp();
            }
            acc
        })
        .collect();
    let mut out = vec![ZERO; d2];
    for b in blocks {
        for (o, v) in out.iter_mut().zip(b) {
            *o += v;
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(from_row_major(d, &out)))
}
