use num_complex::Complex64;
use rayon::prelude::*;

use super::{
    check_budget, check_svecs, columns_to_maps, influences, unit_columns, BathInfluence, FactorTables,
    ForwardBackwardPropagatorSeries, PathBath, QuapiArgs,
};
use crate::empirical::check_dim;
use crate::error::{Error, Result};
use crate::linalg::{to_row_major, ONE, ZERO};
use crate::operator::{AugmentedPropagatorSeries, DensityMatrix};
use crate::trajectory::{from_flat_states, Trajectory};

const BLOCK: usize = 4096;

/// Extra single-point factors `w_k(j)`: `interior[k]` applies while point `k`
/// is inside the path, `end[k]` when it is the final point.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct PointWeights {
    pub interior: Vec<Vec<Complex64>>,
    pub end: Vec<Vec<Complex64>>,
}

pub(crate) struct Engine<'a> {
    pub fbu: &'a ForwardBackwardPropagatorSeries,
    pub tables: &'a FactorTables,
    pub memory: usize,
    pub args: QuapiArgs,
    pub weights: Option<&'a PointWeights>,
}

/// Validates the inputs of a QuAPI run and builds its factor tables.
pub(crate) fn prepare_tables(d: usize, infl: &[BathInfluence], memory: usize, args: &QuapiArgs) -> Result<FactorTables> {
    if memory == 0 {
        return Err(Error::invalid("memory length must be at least 1"));
    }
    check_svecs(d, infl)?;
    for b in infl {
        if b.eta.max_lag() < memory {
            return Err(Error::invalid(format!(
                "eta table covers {} lags, memory needs {memory}",
                b.eta.max_lag()
            )));
        }
    }
    check_budget(d * d, memory, args.max_elements)?;
    Ok(FactorTables::new(infl, d, memory))
}

impl<'a> Engine<'a> {
    fn weight(&self, k: usize, last: bool, j: usize) -> Complex64 {
        match self.weights {
            None => Complex64::new(1.0, 0.0),
            Some(w) => {
                if last {
                    w.end[k][j]
                } else {
                    w.interior[k][j]
                }
            }
        }
    }

    /// `vec(ρ)` at every step `0..=ntimes` starting from `v0`.
    pub fn run(&self, v0: &[Complex64], ntimes: usize) -> Result<Vec<Vec<Complex64>>> {
        let d2 = self.tables.d2;
        check_dim(d2, v0.len())?;
        if self.fbu.len() < ntimes {
            return Err(Error::invalid(format!(
                "{} propagators supplied for {ntimes} steps",
                self.fbu.len()
            )));
        }
        let mut out = Vec::with_capacity(ntimes + 1);
        out.push(v0.to_vec());
        if ntimes == 0 {
            return Ok(out);
        }
        // window holds points `first..n`, newest index fastest
        let mut first = 0usize;
        let mut amps: Vec<Complex64> = (0..d2)
            .map(|j| v0[j] * self.tables.diag(0, 1)[j] * self.weight(0, false, j))
            .collect();
        for n in 1..=ntimes {
            out.push(self.readout(&amps, first, n));
            if n < ntimes {
                let (next, next_first) = self.extend(&amps, first, n, ntimes);
                amps = next;
                first = next_first;
                if self.args.filter_cutoff > 0.0 {
                    let cut = self.args.filter_cutoff;
                    amps.iter_mut().filter(|a| a.norm() < cut).for_each(|a| *a = ZERO);
                }
            }
        }
        Ok(out)
    }

    /// Per-index factors for appending point `n` to a window over points
    /// `lo..n`: `rows[jn][pos][j]` for window position `pos` holding index
    /// `j`, and the single-point factor `scalar[jn]`. The step propagator is
    /// folded into the row of point `n − 1`.
    fn append_rows(&self, lo: usize, n: usize, n_total: usize) -> (Vec<Vec<Vec<Complex64>>>, Vec<Complex64>) {
        let d2 = self.tables.d2;
        let u = &self.fbu.entries[n - 1];
        let last = n == n_total;
        let rows = (0..d2)
            .map(|jn| {
                (lo..n)
                    .map(|p| {
                        let pair = &self.tables.pair(n, p, n_total)[jn * d2..(jn + 1) * d2];
                        if p + 1 == n {
                            pair.iter().enumerate().map(|(j, &f)| f * u[(jn, j)]).collect()
                        } else {
                            pair.to_vec()
                        }
                    })
                    .collect()
            })
            .collect();
        let scalar = (0..d2)
            .map(|jn| self.tables.diag(n, n_total)[jn] * self.weight(n, last, jn))
            .collect();
        (rows, scalar)
    }

    fn readout(&self, amps: &[Complex64], first: usize, n: usize) -> Vec<Complex64> {
        let d2 = self.tables.d2;
        let (rows, scalar) = self.append_rows(first, n, n);
        let block = |(b, chunk): (usize, &[Complex64])| -> Vec<Complex64> {
            let mut buf = vec![ZERO; chunk.len()];
            (0..d2)
                .map(|jn| {
                    window_products(&rows[jn], d2, b * BLOCK, &mut buf);
                    chunk.iter().zip(&buf).map(|(a, f)| a * f).sum()
                })
                .collect()
        };
        // identical blocking either way, so results do not depend on the path
        let partial: Vec<Vec<Complex64>> = if amps.len() > BLOCK {
            amps.par_chunks(BLOCK).enumerate().map(block).collect()
        } else {
            amps.chunks(BLOCK).enumerate().map(block).collect()
        };
        let mut rho = vec![ZERO; d2];
        for p in partial {
            for (r, v) in rho.iter_mut().zip(p) {
                *r += v;
            }
        }
        rho.iter_mut().zip(&scalar).for_each(|(r, s)| *r *= s);
        rho
    }

    fn extend(&self, amps: &[Complex64], first: usize, n: usize, n_total: usize) -> (Vec<Complex64>, usize) {
        let d2 = self.tables.d2;
        let n_total = n_total.max(n + 1);
        if n - first < self.memory {
            let (rows, scalar) = self.append_rows(first, n, n_total);
            let mut next = vec![ZERO; amps.len() * d2];
            for_blocks(&mut next, BLOCK * d2, |b, out| {
                let src = &amps[b * BLOCK..b * BLOCK + out.len() / d2];
                let mut buf = vec![ZERO; src.len()];
                for jn in 0..d2 {
                    window_products(&rows[jn], d2, b * BLOCK, &mut buf);
                    for (i, (a, f)) in src.iter().zip(&buf).enumerate() {
                        out[i * d2 + jn] = a * f * scalar[jn];
                    }
                }
            });
            return (next, first);
        }
        // window is full: sum out the oldest point while appending `n`
        let (rows, scalar) = self.append_rows(first + 1, n, n_total);
        let u = &self.fbu.entries[n - 1];
        let oldest: Vec<Vec<Complex64>> = (0..d2)
            .map(|jn| {
                let pair = &self.tables.pair(n, first, n_total)[jn * d2..(jn + 1) * d2];
                (0..d2)
                    .map(|jo| if first + 1 == n { pair[jo] * u[(jn, jo)] } else { pair[jo] })
                    .collect()
            })
            .collect();
        let stride = amps.len() / d2;
        let mut next = vec![ZERO; amps.len()];
        for_blocks(&mut next, BLOCK * d2, |b, out| {
            let base = b * BLOCK;
            let mut buf = vec![ZERO; out.len() / d2];
            for jn in 0..d2 {
                window_products(&rows[jn], d2, base, &mut buf);
                let old = &oldest[jn];
                for (i, f) in buf.iter().enumerate() {
                    let rest = base + i;
                    let mut s = ZERO;
                    for (jo, o) in old.iter().enumerate() {
                        s += amps[jo * stride + rest] * o;
                    }
                    out[i * d2 + jn] = s * f * scalar[jn];
                }
            }
        });
        (next, first + 1)
    }
}

/// Runs `f(block index, block)` over fixed-size blocks of `data`, in
/// parallel only when there is more than one block.
fn for_blocks<F>(data: &mut [Complex64], size: usize, f: F)
where
    F: Fn(usize, &mut [Complex64]) + Sync,
{
    if data.len() > size {
        data.par_chunks_mut(size).enumerate().for_each(|(b, c)| f(b, c));
    } else {
        data.chunks_mut(size).enumerate().for_each(|(b, c)| f(b, c));
    }
}

/// `out[i] = Π_pos rows[pos][digit_pos(start + i)]`, digits in base `d2`
/// with position 0 most significant. Prefix products are reused across
/// consecutive indices so each entry costs O(1) amortized.
fn window_products(rows: &[Vec<Complex64>], d2: usize, start: usize, out: &mut [Complex64]) {
    let m = rows.len();
    let mut digits = vec![0usize; m];
    let mut r = start;
    for pos in (0..m).rev() {
        digits[pos] = r % d2;
        r /= d2;
    }
    let mut prefix = vec![ONE; m + 1];
    for pos in 0..m {
        prefix[pos + 1] = prefix[pos] * rows[pos][digits[pos]];
    }
    for (i, o) in out.iter_mut().enumerate() {
        if i > 0 {
            let mut pos = m;
            loop {
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < d2 {
                    break;
                }
                digits[pos] = 0;
            }
            for q in pos..m {
                prefix[q + 1] = prefix[q] * rows[q][digits[q]];
            }
        }
        *o = prefix[m];
    }
}

/// Iterative QuAPI with memory length `memory` time steps.
pub fn propagate_quapi(
    fbu: &ForwardBackwardPropagatorSeries,
    baths: &[PathBath],
    beta: f64,
    rho0: &DensityMatrix,
    ntimes: usize,
    memory: usize,
    args: &QuapiArgs,
) -> Result<Trajectory> {
    let infl = influences(baths, beta, fbu.dt, memory)?;
    propagate_quapi_with_eta(fbu, &infl, rho0, ntimes, memory, args)
}

/// As [`propagate_quapi`] with precomputed η tables.
pub fn propagate_quapi_with_eta(
    fbu: &ForwardBackwardPropagatorSeries,
    infl: &[BathInfluence],
    rho0: &DensityMatrix,
    ntimes: usize,
    memory: usize,
    args: &QuapiArgs,
) -> Result<Trajectory> {
    let d = fbu.system_dim();
    check_dim(d, rho0.dim())?;
    let tables = prepare_tables(d, infl, memory, args)?;
    let engine = Engine {
        fbu,
        tables: &tables,
        memory,
        args: *args,
        weights: None,
    };
    let states = engine.run(&to_row_major(rho0.matrix()), ntimes)?;
    Ok(from_flat_states(fbu.dt, d, &states))
}

/// Full-memory QuAPI over every matrix unit gives `E(kΔt)` for `k ≤ n`.
pub fn build_augmented_propagator_quapi(
    fbu: &ForwardBackwardPropagatorSeries,
    infl: &[BathInfluence],
    n: usize,
    args: &QuapiArgs,
) -> Result<AugmentedPropagatorSeries> {
    let d = fbu.system_dim();
    let d2 = d * d;
    let tables = prepare_tables(d, infl, n.max(1), args)?;
    let engine = Engine {
        fbu,
        tables: &tables,
        memory: n.max(1),
        args: *args,
        weights: None,
    };
    let columns: Vec<Vec<Vec<Complex64>>> = unit_columns(d2)
        .iter()
        .map(|v| engine.run(v, n))
        .collect::<Result<_>>()?;
    Ok(columns_to_maps(fbu.dt, d2, &columns, n))
}
