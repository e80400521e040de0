use crate::error::{Error, Result};

use super::quad;
use super::spectral::{trapezoid, SpectralDensity};

/// Harmonic modes with unit masses representing a continuous bath.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteBathModes {
    pub omegas: Vec<f64>,
    pub couplings: Vec<f64>,
}

impl DiscreteBathModes {
    pub fn new(omegas: Vec<f64>, couplings: Vec<f64>) -> Result<Self> {
        if omegas.len() != couplings.len() {
            return Err(Error::DimensionMismatch {
                expected: omegas.len(),
                found: couplings.len(),
            });
        }
        if omegas.iter().any(|&w| !(w > 0.0 && w.is_finite())) || couplings.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("mode frequencies must be positive and couplings finite"));
        }
        Ok(Self { omegas, couplings })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// `Σ_j c_j² / (2ω_j²)`.
    pub fn reorganization(&self) -> f64 {
        self.omegas
            .iter()
            .zip(&self.couplings)
            .map(|(w, c)| c * c / (2.0 * w * w))
            .sum()
    }
}

const GRID_POINTS: usize = 4000;

/// Samples `n_modes` frequencies with equal weight from the density
/// `∝ J(ω)/ω`, placing mode `j` at the cumulative midpoint `(j − ½)/N`.
/// Every mode then carries the same share of the reorganization energy.
pub fn discretize(sd: &SpectralDensity, n_modes: usize) -> Result<DiscreteBathModes> {
    sd.validate()?;
    if n_modes == 0 {
        return Err(Error::invalid("n_modes must be at least 1"));
    }
    let (grid, cumulative) = cumulative_weight(sd)?;
    let total = *cumulative.last().unwrap();
    if !(total > 0.0) {
        // No coupling: keep the frequencies meaningful but switch off the modes.
        let w_hi = *grid.last().unwrap();
        let omegas = (0..n_modes).map(|j| w_hi * (j as f64 + 0.5) / n_modes as f64).collect();
        return DiscreteBathModes::new(omegas, vec![0.0; n_modes]);
    }
    let lambda = sd.reorganization();
    let per_mode = (2.0 * lambda / n_modes as f64).sqrt();
    let mut omegas = Vec::with_capacity(n_modes);
    let mut couplings = Vec::with_capacity(n_modes);
    for j in 0..n_modes {
        let target = total * (j as f64 + 0.5) / n_modes as f64;
        let w = invert(&grid, &cumulative, target);
        omegas.push(w);
        couplings.push(w * per_mode);
    }
    DiscreteBathModes::new(omegas, couplings)
}

fn cumulative_weight(sd: &SpectralDensity) -> Result<(Vec<f64>, Vec<f64>)> {
    if let SpectralDensity::Tabulated(t) = sd {
        let grid = t.omega_grid().to_vec();
        let f: Vec<f64> = grid.iter().map(|&w| sd.j_over_omega(w)).collect();
        let mut cum = Vec::with_capacity(grid.len());
        cum.push(0.0);
        for i in 1..grid.len() {
            let seg = trapezoid(&grid[i - 1..=i], &f[i - 1..=i]);
            cum.push(cum[i - 1] + seg);
        }
        return Ok((grid, cum));
    }
    let w_max = sd.omega_max();
    let w_min = sd.scale() * 1e-6;
    let mut grid = Vec::with_capacity(GRID_POINTS + 1);
    grid.push(0.0);
    let ratio = (w_max / w_min).powf(1.0 / (GRID_POINTS - 1) as f64);
    for i in 0..GRID_POINTS {
        grid.push(w_min * ratio.powi(i as i32));
    }
    *grid.last_mut().unwrap() = w_max;
    let f = |w: f64| sd.j_over_omega(w);
    let mut cum = Vec::with_capacity(grid.len());
    cum.push(0.0);
    for i in 1..grid.len() {
        let seg = quad::integrate_real(&f, grid[i - 1], grid[i], 1, 1e-12)
            .ok_or_else(|| Error::invalid("cumulative spectral weight did not converge"))?;
        cum.push(cum[i - 1] + seg);
    }
    Ok((grid, cum))
}

fn invert(grid: &[f64], cum: &[f64], target: f64) -> f64 {
    let i = cum.partition_point(|&c| c < target).clamp(1, cum.len() - 1);
    let (c0, c1) = (cum[i - 1], cum[i]);
    let f = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
    grid[i - 1] + f * (grid[i] - grid[i - 1])
}
