use num_complex::Complex64;
use rayon::prelude::*;

use super::{check_svecs, BathInfluence, FactorTables, ForwardBackwardPropagatorSeries, QuapiArgs};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ZERO};
use crate::operator::AugmentedPropagatorSeries;

const BLOCK: usize = 256;

/// Augmented propagators from a sum over blip configurations.
///
/// Every time point is either a sojourn (any forward-backward index with
/// `Δs = 0` for all baths, summed implicitly by the matrix chain) or one
/// specific blip index. Only blips carry influence factors, so each
/// configuration reduces to a chain of propagators and diagonal weights.
pub fn build_augmented_propagator_blip(
    fbu: &ForwardBackwardPropagatorSeries,
    infl: &[BathInfluence],
    n: usize,
    args: &QuapiArgs,
) -> Result<AugmentedPropagatorSeries> {
    let d = fbu.system_dim();
    check_svecs(d, infl)?;
    if fbu.len() < n {
        return Err(Error::invalid(format!("{} propagators supplied for {n} steps", fbu.len())));
    }
    if infl.iter().any(|b| b.eta.max_lag() < n) {
        return Err(Error::invalid("eta table shorter than the path"));
    }
    let d2 = d * d;
    let sojourn: Vec<bool> = (0..d2)
        .map(|j| infl.iter().all(|b| b.svec[j / d] == b.svec[j % d]))
        .collect();
    let blips: Vec<usize> = (0..d2).filter(|&j| !sojourn[j]).collect();
    let choices = blips.len() + 1;
    let count = (choices as u128).checked_pow(n as u32 + 1).unwrap_or(u128::MAX);
    if count > args.max_elements {
        return Err(Error::BudgetExceeded {
            required: count,
            budget: args.max_elements,
        });
    }
    let tables = FactorTables::new(infl, d, n.max(1));
    let maps = (1..=n)
        .map(|k| blip_sum(fbu, &tables, &sojourn, &blips, k))
        .collect();
    Ok(AugmentedPropagatorSeries::new(fbu.dt, maps))
}

fn blip_sum(
    fbu: &ForwardBackwardPropagatorSeries,
    tables: &FactorTables,
    sojourn: &[bool],
    blips: &[usize],
    n: usize,
) -> CMatrix {
    let d2 = tables.d2;
    let choices = blips.len() + 1;
    let count = choices.pow(n as u32 + 1);
    let partial: Vec<CMatrix> = (0..count.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = CMatrix::zeros(d2, d2);
            // config[k] = 0 for a sojourn, i + 1 for blip index blips[i]
            let mut config = vec![0usize; n + 1];
            let mut weights = vec![vec![ZERO; d2]; n + 1];
            for idx in b * BLOCK..((b + 1) * BLOCK).min(count) {
                let mut r = idx;
                for c in config.iter_mut() {
                    *c = r % choices;
                    r /= choices;
                }
                let mut scalar = Complex64::new(1.0, 0.0);
                for k in 0..=n {
                    let w = &mut weights[k];
                    if config[k] == 0 {
                        for j in 0..d2 {
                            w[j] = if sojourn[j] { Complex64::new(1.0, 0.0) } else { ZERO };
                        }
                    } else {
                        w.fill(ZERO);
                        let j = blips[config[k] - 1];
                        w[j] = tables.diag(k, n)[j];
                    }
                }
                for k in 1..=n {
                    if config[k] == 0 {
                        continue;
                    }
                    let jk = blips[config[k] - 1];
                    for kp in 0..k {
                        let row = &tables.pair(k, kp, n)[jk * d2..(jk + 1) * d2];
                        if config[kp] == 0 {
                            for (w, f) in weights[kp].iter_mut().zip(row) {
                                *w *= f;
                            }
                        } else {
                            scalar *= row[blips[config[kp] - 1]];
                        }
                    }
                }
                // chain D_n U_{n-1} … U_0 D_0
                let mut v = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(weights[0].clone()));
                for k in 1..=n {
                    v = &fbu.entries[k - 1] * v;
                    for (j, &w) in weights[k].iter().enumerate() {
                        v.row_mut(j).iter_mut().for_each(|z| *z *= w);
                    }
                }
                acc += v * scalar;
            }
            acc
        })
        .collect();
    let mut total = CMatrix::zeros(d2, d2);
    for p in partial {
        total += p;
    }
    total
}
