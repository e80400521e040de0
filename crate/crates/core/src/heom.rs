//! Hierarchical equations of motion for Drude-Lorentz baths, in the plain and
//! the rescaled form, with the Markovian closure for truncated Matsubara terms.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::{matsubara_expand, DrudeLorentzSD, MatsubaraExpansion};
use crate::empirical::{check_dim, check_dt};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::linalg::{to_row_major, I, ZERO};
use crate::operator::{hamiltonian_at, AugmentedPropagatorSeries, DensityMatrix, ExternalField, Operator};
use crate::trajectory::{from_flat_states, time_grid, Trajectory};

const NONE: usize = usize::MAX;

/// All multi-indices `n` with `Σ n ≤ lmax`, ordered by depth and then
/// lexicographically, with the positions of their raised and lowered neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy {
    width: usize,
    indices: Vec<Vec<u32>>,
    plus: Vec<usize>,
    minus: Vec<usize>,
}

impl Hierarchy {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of `(bath, mode)` slots per index, `N_env (M + 1)`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn index(&self, i: usize) -> &[u32] {
        &self.indices[i]
    }

    pub fn depth(&self, i: usize) -> u32 {
        self.indices[i].iter().sum()
    }

    /// Position of `n + e_k`, if it lies inside the truncation.
    pub fn raised(&self, i: usize, k: usize) -> Option<usize> {
        let p = self.plus[i * self.width + k];
        (p != NONE).then_some(p)
    }

    /// Position of `n − e_k`, if `n_k > 0`.
    pub fn lowered(&self, i: usize, k: usize) -> Option<usize> {
        let p = self.minus[i * self.width + k];
        (p != NONE).then_some(p)
    }
}

pub fn enumerate_hierarchy(n_env: usize, num_modes: usize, lmax: usize) -> Hierarchy {
    let width = n_env * (num_modes + 1);
    let mut indices: Vec<Vec<u32>> = Vec::new();
    for depth in 0..=lmax as u32 {
        let mut cur = vec![0u32; width];
        compositions(&mut cur, 0, depth, &mut indices);
        if width == 0 {
            break;
        }
    }
    let lookup: HashMap<Vec<u32>, usize> = indices.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
    let mut plus = vec![NONE; indices.len() * width];
    let mut minus = vec![NONE; indices.len() * width];
    for (i, n) in indices.iter().enumerate() {
        let mut m = n.clone();
        for k in 0..width {
            m[k] += 1;
            if let Some(&p) = lookup.get(&m) {
                plus[i * width + k] = p;
            }
            m[k] -= 1;
            if m[k] > 0 {
                m[k] -= 1;
                minus[i * width + k] = lookup[&m];
                m[k] += 1;
            }
        }
    }
    Hierarchy {
        width,
        indices,
        plus,
        minus,
    }
}

// Lexicographically descending, so the first-slot excitations come first.
fn compositions(cur: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 >= cur.len() {
        if let Some(last) = cur.last_mut() {
            *last = remaining;
        }
        out.push(cur.clone());
        return;
    }
    for v in (0..=remaining).rev() {
        cur[pos] = v;
        compositions(cur, pos + 1, remaining - v, out);
    }
    cur[pos] = 0;
}

/// A Drude-Lorentz environment with its coupling operator and the Matsubara
/// expansion of its correlation function.
#[derive(Clone, Debug, PartialEq)]
pub struct HeomBathBinding {
    pub sd: DrudeLorentzSD,
    pub coupling_op: Operator,
    pub beta: f64,
    pub expansion: MatsubaraExpansion,
}

impl HeomBathBinding {
    pub fn new(sd: DrudeLorentzSD, coupling_op: Operator, beta: f64, num_modes: usize) -> Result<Self> {
        if !coupling_op.is_hermitian() {
            return Err(Error::NotHermitian("bath coupling operator"));
        }
        let expansion = matsubara_expand(&sd, beta, num_modes)?;
        Ok(Self {
            sd,
            coupling_op,
            beta,
            expansion,
        })
    }

    /// Prefactor of the double commutator standing in for the Matsubara
    /// terms beyond the expansion.
    pub fn markovian_correction(&self) -> f64 {
        let full = 2.0 * self.sd.effective_lambda() / (self.beta * self.sd.gamma);
        let kept: f64 = self.expansion.nus.iter().zip(&self.expansion.cs).map(|(nu, c)| c.re / nu).sum();
        full - kept
    }
}

#[derive(Clone, Debug)]
pub struct HeomRequest {
    pub hamiltonian: Operator,
    pub baths: Vec<HeomBathBinding>,
    pub dt: f64,
    pub ntimes: usize,
    pub lmax: usize,
    pub scaled: bool,
    pub external_fields: Vec<ExternalField>,
    pub integrator: IntegratorConfig,
}

impl HeomRequest {
    pub fn new(hamiltonian: Operator, baths: Vec<HeomBathBinding>, dt: f64, ntimes: usize, lmax: usize) -> Self {
        Self {
            hamiltonian,
            baths,
            dt,
            ntimes,
            lmax,
            scaled: true,
            external_fields: Vec::new(),
            integrator: IntegratorConfig::default(),
        }
    }

    fn num_modes(&self) -> Result<usize> {
        let m = self.baths.first().map_or(0, |b| b.expansion.num_modes);
        if self.baths.iter().any(|b| b.expansion.num_modes != m) {
            return Err(Error::invalid("all baths must use the same number of Matsubara modes"));
        }
        Ok(m)
    }
}

struct BathTerms {
    // diagonal of s in the site basis when s is diagonal
    diag: Option<Vec<f64>>,
    s: Vec<Complex64>,
    markov: f64,
}

struct Rhs {
    d: usize,
    h: crate::linalg::CMatrix,
    fields: Vec<ExternalField>,
    hierarchy: Hierarchy,
    baths: Vec<BathTerms>,
    modes_per_bath: usize,
    cs: Vec<Complex64>,
    // per ADO: Σ n ν
    damping: Vec<f64>,
    // per (ADO, slot): weight of the raised neighbour and of the lowered one
    w_plus: Vec<f64>,
    w_minus: Vec<f64>,
}

impl Rhs {
    fn new(req: &HeomRequest) -> Result<Self> {
        check_dt(req.dt)?;
        let d = req.hamiltonian.dim();
        for b in &req.baths {
            check_dim(d, b.coupling_op.dim())?;
        }
        for f in &req.external_fields {
            check_dim(d, f.coupling_op().dim())?;
        }
        let m = req.num_modes()?;
        let per = m + 1;
        let hierarchy = enumerate_hierarchy(req.baths.len(), m, req.lmax);
        let width = hierarchy.width();
        let mut nus = Vec::with_capacity(width);
        let mut cs = Vec::with_capacity(width);
        for b in &req.baths {
            nus.extend_from_slice(&b.expansion.nus);
            cs.extend_from_slice(&b.expansion.cs);
        }
        let mut damping = Vec::with_capacity(hierarchy.len());
        let mut w_plus = vec![0.0; hierarchy.len() * width];
        let mut w_minus = vec![0.0; hierarchy.len() * width];
        for i in 0..hierarchy.len() {
            let n = hierarchy.index(i);
            damping.push(n.iter().zip(&nus).map(|(&k, nu)| k as f64 * nu).sum());
            for k in 0..width {
                let nk = n[k] as f64;
                let mag = cs[k].norm();
                let (wp, wm) = if req.scaled && mag > 0.0 {
                    (((nk + 1.0) * mag).sqrt(), (nk / mag).sqrt())
                } else {
                    (1.0, nk)
                };
                w_plus[i * width + k] = wp;
                w_minus[i * width + k] = wm;
            }
        }
        let baths = req
            .baths
            .iter()
            .map(|b| {
                let s = b.coupling_op.matrix();
                let is_diag = (0..d).all(|i| (0..d).all(|j| i == j || s[(i, j)] == ZERO));
                BathTerms {
                    diag: is_diag.then(|| (0..d).map(|i| s[(i, i)].re).collect()),
                    s: to_row_major(s),
                    markov: b.markovian_correction(),
                }
            })
            .collect();
        Ok(Self {
            d,
            h: req.hamiltonian.matrix().clone(),
            fields: req.external_fields.clone(),
            hierarchy,
            baths,
            modes_per_bath: per,
            cs,
            damping,
            w_plus,
            w_minus,
        })
    }

    fn state_len(&self) -> usize {
        self.hierarchy.len() * self.d * self.d
    }

    fn eval(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let d = self.d;
        let dd = d * d;
        let h = to_row_major(&if self.fields.is_empty() {
            self.h.clone()
        } else {
            hamiltonian_at(&self.h, &self.fields, t)
        });
        let width = self.hierarchy.width();
        dy.par_chunks_mut(dd).enumerate().for_each_init(
            || (vec![ZERO; dd], vec![ZERO; dd]),
            |(acc, tmp), (i, out)| {
                let rho = &y[i * dd..(i + 1) * dd];
                // −i[H, ρ] − Σnν ρ
                for a in 0..d {
                    for b in 0..d {
                        let mut z = ZERO;
                        for k in 0..d {
                            z += h[a * d + k] * rho[k * d + b] - rho[a * d + k] * h[k * d + b];
                        }
                        out[a * d + b] = -I * z - self.damping[i] * rho[a * d + b];
                    }
                }
                for (bi, bath) in self.baths.iter().enumerate() {
                    let slots = bi * self.modes_per_bath..(bi + 1) * self.modes_per_bath;
                    // Σ_m w⁺ ρ_{n+}
                    acc.fill(ZERO);
                    let mut any = false;
                    for k in slots.clone() {
                        if let Some(p) = self.hierarchy.raised(i, k) {
                            let w = self.w_plus[i * width + k];
                            for (x, v) in acc.iter_mut().zip(&y[p * dd..(p + 1) * dd]) {
                                *x += w * v;
                            }
                            any = true;
                        }
                    }
                    match &bath.diag {
                        Some(s) => {
                            for a in 0..d {
                                for b in 0..d {
                                    let ds = s[a] - s[b];
                                    let idx = a * d + b;
                                    out[idx] -= bath.markov * ds * ds * rho[idx];
                                    if any {
                                        out[idx] -= I * ds * acc[idx];
                                    }
                                }
                            }
                            for k in slots {
                                if let Some(p) = self.hierarchy.lowered(i, k) {
                                    let c = self.cs[k] * self.w_minus[i * width + k];
                                    let cc = self.cs[k].conj() * self.w_minus[i * width + k];
                                    let low = &y[p * dd..(p + 1) * dd];
                                    for a in 0..d {
                                        for b in 0..d {
                                            let idx = a * d + b;
                                            out[idx] -= I * (c * s[a] - cc * s[b]) * low[idx];
                                        }
                                    }
                                }
                            }
                        }
                        None => {
                            let s = &bath.s;
                            // [s, [s, ρ]]
                            commutator(d, s, rho, tmp);
                            let inner = tmp.clone();
                            commutator(d, s, &inner, tmp);
                            for (o, v) in out.iter_mut().zip(tmp.iter()) {
                                *o -= bath.markov * v;
                            }
                            if any {
                                commutator(d, s, acc, tmp);
                                for (o, v) in out.iter_mut().zip(tmp.iter()) {
                                    *o -= I * v;
                                }
                            }
                            for k in slots {
                                if let Some(p) = self.hierarchy.lowered(i, k) {
                                    let c = self.cs[k] * self.w_minus[i * width + k];
                                    let cc = self.cs[k].conj() * self.w_minus[i * width + k];
                                    let low = &y[p * dd..(p + 1) * dd];
                                    for a in 0..d {
                                        for b in 0..d {
                                            let mut z = ZERO;
                                            for q in 0..d {
                                                z += c * s[a * d + q] * low[q * d + b] - cc * low[a * d + q] * s[q * d + b];
                                            }
                                            out[a * d + b] -= I * z;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            },
        );
    }
}

fn commutator(d: usize, s: &[Complex64], x: &[Complex64], out: &mut [Complex64]) {
    for a in 0..d {
        for b in 0..d {
            let mut z = ZERO;
            for q in 0..d {
                z += s[a * d + q] * x[q * d + b] - x[a * d + q] * s[q * d + b];
            }
            out[a * d + b] = z;
        }
    }
}

fn run(rhs: &Rhs, rho0: &[Complex64], dt: f64, ntimes: usize, cfg: &IntegratorConfig) -> Result<Vec<Vec<Complex64>>> {
    let mut y0 = vec![ZERO; rhs.state_len()];
    y0[..rho0.len()].copy_from_slice(rho0);
    integrate(|t, y, dy| rhs.eval(t, y, dy), &y0, &time_grid(dt, ntimes), cfg)
}

/// Propagates the hierarchy and returns the physical density matrix.
pub fn propagate_heom(req: &HeomRequest, rho0: &DensityMatrix) -> Result<Trajectory> {
    let rhs = Rhs::new(req)?;
    check_dim(rhs.d, rho0.dim())?;
    let states = run(&rhs, &to_row_major(rho0.matrix()), req.dt, req.ntimes, &req.integrator)?;
    Ok(from_flat_states(req.dt, rhs.d, &states))
}

/// Cumulative maps `E(kΔt)` obtained by propagating every matrix unit
/// `|i⟩⟨j|` through the hierarchy.
pub fn heom_augmented_propagators(req: &HeomRequest) -> Result<AugmentedPropagatorSeries> {
    if !req.external_fields.is_empty() {
        return Err(Error::invalid("augmented propagators are built without external fields"));
    }
    let rhs = Rhs::new(req)?;
    let d = rhs.d;
    let dd = d * d;
    let columns: Vec<Vec<Vec<Complex64>>> = (0..dd)
        .map(|col| {
            let mut unit = vec![ZERO; dd];
            unit[col] = Complex64::new(1.0, 0.0);
            run(&rhs, &unit, req.dt, req.ntimes, &req.integrator)
        })
        .collect::<Result<_>>()?;
    let maps = (1..=req.ntimes)
        .map(|k| {
            let mut m = crate::linalg::CMatrix::zeros(dd, dd);
            for (col, states) in columns.iter().enumerate() {
                for row in 0..dd {
                    m[(row, col)] = states[k][row];
                }
            }
            m
        })
        .collect();
    Ok(AugmentedPropagatorSeries::new(req.dt, maps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::{propagate_bare, BarePropagateRequest};

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn hierarchy_sizes() {
        assert_eq!(enumerate_hierarchy(1, 0, 1).len(), 2);
        assert_eq!(enumerate_hierarchy(1, 2, 3).len(), 20);
        assert_eq!(enumerate_hierarchy(7, 2, 3).len(), 2024);
        assert_eq!(enumerate_hierarchy(0, 3, 4).len(), 1);
        for (e, m, l) in [(2, 1, 4), (3, 0, 5), (1, 4, 2)] {
            assert_eq!(enumerate_hierarchy(e, m, l).len(), binom(e * (m + 1) + l, l));
        }
    }

    #[test]
    fn hierarchy_order_and_neighbours() {
        let h = enumerate_hierarchy(1, 1, 2);
        let idx: Vec<&[u32]> = (0..h.len()).map(|i| h.index(i)).collect();
        assert_eq!(idx, vec![&[0, 0][..], &[1, 0], &[0, 1], &[2, 0], &[1, 1], &[0, 2]]);
        for i in 0..h.len() {
            for k in 0..h.width() {
                if let Some(p) = h.raised(i, k) {
                    assert_eq!(h.lowered(p, k), Some(i));
                    assert_eq!(h.depth(p), h.depth(i) + 1);
                } else {
                    assert_eq!(h.depth(i), 2);
                }
            }
        }
    }

    fn spin_boson(lambda: f64, m: usize, lmax: usize, scaled: bool) -> HeomRequest {
        let bath = HeomBathBinding::new(DrudeLorentzSD::new(lambda, 2.0, 2.0), Operator::sigma_z(), 1.0, m).unwrap();
        let mut req = HeomRequest::new(crate::create_tls_hamiltonian(0.5, 1.0), vec![bath], 0.1, 80, lmax);
        req.scaled = scaled;
        req
    }

    #[test]
    fn zero_coupling_is_bare() {
        let req = spin_boson(0.0, 1, 3, true);
        let rho0 = DensityMatrix::pure_state(2, 0);
        let a = propagate_heom(&req, &rho0).unwrap();
        let b = propagate_bare(&BarePropagateRequest::new(req.hamiltonian.clone(), rho0, 0.1, 80)).unwrap();
        assert!(a.max_deviation(&b) < 1e-9);
    }

    #[test]
    fn trace_and_hermiticity() {
        let req = spin_boson(0.5, 1, 5, true);
        let traj = propagate_heom(&req, &DensityMatrix::pure_state(2, 0)).unwrap();
        for rho in traj.states() {
            assert!((rho.trace().re - 1.0).abs() < 1e-8);
            assert!(rho.hermiticity_error() < 1e-9);
        }
    }

    #[test]
    fn scaled_matches_unscaled() {
        let rho0 = DensityMatrix::pure_state(2, 0);
        let a = propagate_heom(&spin_boson(0.5, 1, 4, true), &rho0).unwrap();
        let b = propagate_heom(&spin_boson(0.5, 1, 4, false), &rho0).unwrap();
        assert!(a.max_deviation(&b) < 1e-8, "{}", a.max_deviation(&b));
    }

    #[test]
    fn general_coupling_matches_diagonal_fast_path() {
        // σx coupling in the σx eigenbasis is diagonal; compare both paths.
        let h = crate::create_tls_hamiltonian(0.5, 1.0);
        let u = crate::linalg::CMatrix::from_row_slice(
            2,
            2,
            &[1.0, 1.0, 1.0, -1.0].map(|x| Complex64::new(x / 2f64.sqrt(), 0.0)),
        );
        let rot = |m: &crate::linalg::CMatrix| &u * m * u.adjoint();
        let sd = DrudeLorentzSD::new(0.4, 1.5, 2.0);
        let rho0 = DensityMatrix::pure_state(2, 0);
        let general = HeomRequest::new(
            h.clone(),
            vec![HeomBathBinding::new(sd, Operator::sigma_x(), 1.0, 1).unwrap()],
            0.1,
            40,
            3,
        );
        let diag = HeomRequest::new(
            Operator::new(rot(h.matrix())).unwrap(),
            vec![HeomBathBinding::new(sd, Operator::new(rot(Operator::sigma_x().matrix())).unwrap(), 1.0, 1).unwrap()],
            0.1,
            40,
            3,
        );
        let a = propagate_heom(&general, &rho0).unwrap();
        let b = propagate_heom(&diag, &DensityMatrix::new(rot(rho0.matrix())).unwrap()).unwrap();
        for (x, y) in a.states().iter().zip(b.states()) {
            let back = u.adjoint() * y.matrix() * &u;
            assert!(crate::linalg::max_abs(&(x.matrix() - back)) < 1e-9);
        }
    }

    #[test]
    fn augmented_propagators_reproduce_direct_run() {
        let mut req = spin_boson(0.3, 1, 3, true);
        req.ntimes = 10;
        let series = heom_augmented_propagators(&req).unwrap();
        let rho0 = DensityMatrix::from_real_rows(2, &[0.6, 0.2, 0.2, 0.4]).unwrap();
        let via = crate::apply_propagator(&series, &rho0, req.dt, 10).unwrap();
        let direct = propagate_heom(&req, &rho0).unwrap();
        assert!(via.max_deviation(&direct) < 1e-9);
    }

    #[test]
    fn markov_correction_vanishes_with_many_modes() {
        let b = HeomBathBinding::new(DrudeLorentzSD::new(0.5, 2.0, 2.0), Operator::sigma_z(), 1.0, 20000).unwrap();
        assert!(b.markovian_correction().abs() < 1e-4 * 2.0 * 0.125 / 2.0);
    }
}
