//! Element-wise comparison of two density-matrix series.

use anyhow::{bail, Result};

use crate::output::Series;

#[derive(Debug, Clone, PartialEq)]
pub struct ElementDeviation {
    pub i: usize,
    pub j: usize,
    pub max_abs: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub elements: Vec<ElementDeviation>,
}

impl Report {
    pub fn max_abs(&self) -> f64 {
        self.elements.iter().map(|e| e.max_abs).fold(0.0, f64::max)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("element      max_abs                  rms\n");
        for e in &self.elements {
            out.push_str(&format!("rho_{}_{:<6} {:.16e}  {:.16e}\n", e.i, e.j, e.max_abs, e.rms));
        }
        out.push_str(&format!("overall max_abs {:.16e}\n", self.max_abs()));
        out
    }
}

/// Deviations `|a_ij(t) − b_ij(t)|` over the common grid.
pub fn compare(a: &Series, b: &Series) -> Result<Report> {
    if a.dim != b.dim {
        bail!("dimension mismatch: {} vs {}", a.dim, b.dim);
    }
    if a.times.len() != b.times.len() {
        bail!("grid mismatch: {} vs {} time points", a.times.len(), b.times.len());
    }
    for (k, (ta, tb)) in a.times.iter().zip(&b.times).enumerate() {
        if (ta - tb).abs() > 1e-9 * ta.abs().max(tb.abs()).max(1.0) {
            bail!("grid mismatch at row {}: t = {ta} vs {tb}", k + 1);
        }
    }
    let d = a.dim;
    let n = a.times.len() as f64;
    let elements = (0..d * d)
        .map(|k| {
            let (i, j) = (k / d, k % d);
            let (mut max_abs, mut sq) = (0.0f64, 0.0);
            for r in 0..a.times.len() {
                let (ar, ai) = a.element(r, i, j);
                let (br, bi) = b.element(r, i, j);
                let dev = (ar - br).hypot(ai - bi);
                max_abs = max_abs.max(dev);
                sq += dev * dev;
            }
            ElementDeviation {
                i,
                j,
                max_abs,
                rms: (sq / n).sqrt(),
            }
        })
        .collect();
    Ok(Report { elements })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: f64) -> Series {
        Series {
            dim: 1,
            times: vec![0.0, 1.0],
            rows: vec![vec![1.0, 0.0], vec![v, 0.0]],
        }
    }

    #[test]
    fn identical_series_have_zero_deviation() {
        let r = compare(&series(0.5), &series(0.5)).unwrap();
        assert_eq!(r.max_abs(), 0.0);
        assert_eq!(r.elements[0].rms, 0.0);
    }

    #[test]
    fn deviation_and_rms() {
        let r = compare(&series(0.5), &series(0.8)).unwrap();
        assert!((r.max_abs() - 0.3).abs() < 1e-15);
        assert!((r.elements[0].rms - 0.3 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let mut b = series(0.5);
        b.times[1] = 2.0;
        assert!(compare(&series(0.5), &b).is_err());
    }
}
