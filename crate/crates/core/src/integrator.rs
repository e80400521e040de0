//! Dormand–Prince 5(4) integrator with PI step-size control.
//!
//! The state is a flat complex vector; matrix-valued problems are flattened
//! row-major by the callers. Solutions are reported exactly on a caller-given
//! time grid: steps are shortened so that every grid point is hit.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
    pub max_step: f64,
    /// Disables error control and takes steps of exactly this size.
    pub fixed_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            initial_step: None,
            max_step: f64::INFINITY,
            fixed_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn fixed(step: f64) -> Self {
        Self {
            fixed_step: Some(step),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::invalid("integrator tolerances must be positive"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::invalid("max_step must be positive"));
        }
        if let Some(h) = self.fixed_step {
            if !(h > 0.0) {
                return Err(Error::invalid("fixed step must be positive"));
            }
        }
        Ok(())
    }
}

// Dormand & Prince (1980) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b̂ (fifth minus embedded fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
// PI controller exponents for a 5th order method (Hairer & Wanner).
const ALPHA: f64 = 0.7 / 5.0;
const BETA: f64 = 0.4 / 5.0;

struct Workspace {
    k: [Vec<Complex64>; 7],
    tmp: Vec<Complex64>,
    y_new: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Self {
            k: std::array::from_fn(|_| z.clone()),
            tmp: z.clone(),
            y_new: z,
        }
    }
}

fn combine(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(a, k) in terms {
            acc += k[i] * a;
        }
        *o = y[i] + acc * h;
    }
}

fn all_finite(v: &[Complex64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// One Dormand–Prince step from `(t, y)`; `ws.k[0]` must hold `f(t, y)`.
/// Leaves the new state in `ws.y_new`, `f(t+h, y_new)` in `ws.k[6]`, and
/// returns the scaled error norm.
fn dp_step<F>(rhs: &mut F, t: f64, y: &[Complex64], h: f64, ws: &mut Workspace, cfg: &IntegratorConfig) -> Result<f64>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let Workspace { k, tmp, y_new } = ws;
    let [k1, k2, k3, k4, k5, k6, k7] = k;
    combine(tmp, y, h, &[(A21, k1)]);
    rhs(t + C2 * h, tmp, k2);
    combine(tmp, y, h, &[(A31, k1), (A32, k2)]);
    rhs(t + C3 * h, tmp, k3);
    combine(tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
    rhs(t + C4 * h, tmp, k4);
    combine(tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
    rhs(t + C5 * h, tmp, k5);
    combine(tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
    rhs(t + h, tmp, k6);
    combine(y_new, y, h, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
    rhs(t + h, y_new, k7);
    if !all_finite(k7) || !all_finite(y_new) {
        return Err(Error::NonFiniteDerivative { t: t + h });
    }
    let mut sum = 0.0;
    for i in 0..y.len() {
        let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        let scale = cfg.atol + cfg.rtol * y[i].norm().max(y_new[i].norm());
        let r = e.norm() / scale;
        sum += r * r;
    }
    Ok((sum / y.len().max(1) as f64).sqrt())
}

fn norm_rms(v: &[Complex64], scale: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(scale).map(|(z, s)| (z.norm() / s).powi(2)).sum();
    (s / v.len().max(1) as f64).sqrt()
}

// Hairer, Nørsett & Wanner, "Solving ODEs I", II.4.
fn initial_step<F>(rhs: &mut F, t0: f64, y0: &[Complex64], f0: &[Complex64], cfg: &IntegratorConfig) -> f64
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let scale: Vec<f64> = y0.iter().map(|z| cfg.atol + cfg.rtol * z.norm()).collect();
    let d0 = norm_rms(y0, &scale);
    let d1 = norm_rms(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<Complex64> = y0.iter().zip(f0).map(|(y, f)| y + f * h0).collect();
    let mut f1 = vec![Complex64::new(0.0, 0.0); y0.len()];
    rhs(t0 + h0, &y1, &mut f1);
    let diff: Vec<Complex64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm_rms(&diff, &scale) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(cfg.max_step)
}

/// Integrates `dy/dt = rhs(t, y)` and returns `y` at every point of `t_grid`.
///
/// `t_grid` must be strictly increasing; its first entry is the initial time
/// and the first returned state is `y0` itself.
pub fn integrate<F>(mut rhs: F, y0: &[Complex64], t_grid: &[f64], cfg: &IntegratorConfig) -> Result<Vec<Vec<Complex64>>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    cfg.validate()?;
    if t_grid.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    let n = y0.len();
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(y0.to_vec());
    if t_grid.len() == 1 {
        return Ok(out);
    }

    let mut ws = Workspace::new(n);
    let mut y = y0.to_vec();
    let mut t = t_grid[0];
    rhs(t, &y, &mut ws.k[0]);
    if !all_finite(&ws.k[0]) {
        return Err(Error::NonFiniteDerivative { t });
    }

    if let Some(h) = cfg.fixed_step {
        for &target in &t_grid[1..] {
            while t < target {
                let step = h.min(target - t);
                let landing = target - t <= h * (1.0 + 1e-12);
                dp_step(&mut rhs, t, &y, if landing { target - t } else { step }, &mut ws, cfg)?;
                t = if landing { target } else { t + step };
                std::mem::swap(&mut y, &mut ws.y_new);
                ws.k.swap(0, 6);
            }
            out.push(y.clone());
        }
        return Ok(out);
    }

    let mut h = cfg
        .initial_step
        .unwrap_or_else(|| initial_step(&mut rhs, t, &y, &ws.k[0].clone(), cfg))
        .min(cfg.max_step);
    let mut err_prev: f64 = 1e-4;

    for &target in &t_grid[1..] {
        while t < target {
            let remaining = target - t;
            let landing = h >= remaining * (1.0 - 1e-12);
            let h_try = if landing { remaining } else { h };
            if h_try <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t });
            }
            let err = dp_step(&mut rhs, t, &y, h_try, &mut ws, cfg)?;
            if err <= 1.0 {
                t = if landing { target } else { t + h_try };
                std::mem::swap(&mut y, &mut ws.y_new);
                ws.k.swap(0, 6);
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-ALPHA) * err_prev.powf(BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                err_prev = err.max(1e-4);
                // a step shortened to land on the grid says little about the natural step size
                let base = if landing { h.max(h_try) } else { h_try };
                h = (base * factor).min(cfg.max_step);
            } else {
                let factor = (SAFETY * err.powf(-1.0 / 5.0)).max(MIN_FACTOR);
                h = h_try * factor;
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cz(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn exponential_decay() {
        let out = integrate(|_, y, dy| dy[0] = -y[0], &[cz(1.0)], &[0.0, 1.0], &IntegratorConfig::default()).unwrap();
        assert!((out[1][0].re - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn lands_on_every_grid_point() {
        let grid: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let out = integrate(|_, y, dy| dy[0] = -y[0], &[cz(1.0)], &grid, &IntegratorConfig::default()).unwrap();
        assert_eq!(out.len(), grid.len());
        for (t, y) in grid.iter().zip(&out) {
            assert!((y[0].re - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn oscillator_with_complex_state() {
        // dy/dt = -i y
        let out = integrate(
            |_, y, dy| dy[0] = Complex64::new(0.0, -1.0) * y[0],
            &[cz(1.0)],
            &[0.0, 10.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        let want = Complex64::new(0.0, -10.0).exp();
        assert!((out[1][0] - want).norm() < 1e-8);
    }

    #[test]
    fn rejects_bad_grid() {
        let cfg = IntegratorConfig::default();
        assert!(integrate(|_, _, _| {}, &[cz(1.0)], &[0.0, 0.0], &cfg).is_err());
        assert!(integrate(|_, _, _| {}, &[cz(1.0)], &[], &cfg).is_err());
        assert!(integrate(|_, _, _| {}, &[cz(1.0)], &[0.0, 1.0], &IntegratorConfig::with_tolerances(0.0, 1.0)).is_err());
    }

    #[test]
    fn non_finite_rhs_is_reported() {
        let err = integrate(
            |t, _, dy| dy[0] = if t > 0.5 { cz(f64::NAN) } else { cz(1.0) },
            &[cz(0.0)],
            &[0.0, 1.0],
            &IntegratorConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteDerivative { .. }));
    }

    #[test]
    fn finite_time_blowup_underflows() {
        // y' = y², y(0) = 1 blows up at t = 1
        let err = integrate(|_, y, dy| dy[0] = y[0] * y[0], &[cz(1.0)], &[0.0, 2.0], &IntegratorConfig::default())
            .unwrap_err();
        match err {
            Error::StepSizeUnderflow { t } | Error::NonFiniteDerivative { t } => assert!(t > 0.9 && t <= 1.0 + 1e-6, "{t}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
