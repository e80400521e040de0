use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

use super::quad;
use super::spectral::SpectralDensity;

/// Which thermal factor multiplies the real (dissipative) part of the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ThermalWeight {
    /// `coth(βω/2)`, the full quantum response.
    #[default]
    Quantum,
    /// `coth(βω/2) − 2/(βω)`, what remains after a classical bath has been
    /// accounted for by trajectories.
    QuantumMinusClassical,
    /// No fluctuation part at all: only the bath response survives.
    ResponseOnly,
}

impl ThermalWeight {
    fn at(self, beta: f64, omega: f64) -> f64 {
        let x = 0.5 * beta * omega;
        match self {
            Self::Quantum => {
                if x > 20.0 {
                    1.0 + 2.0 * (-2.0 * x).exp()
                } else {
                    1.0 / x.tanh()
                }
            }
            Self::QuantumMinusClassical => {
                if x < 1e-3 {
                    x / 3.0 - x * x * x / 45.0
                } else if x > 20.0 {
                    1.0 - 1.0 / x
                } else {
                    1.0 / x.tanh() - 1.0 / x
                }
            }
            Self::ResponseOnly => 0.0,
        }
    }
}

/// Discretized influence-functional kernel on a uniform grid of time points.
///
/// Point 0 represents `[0, Δt/2]`, an interior point `k` represents
/// `[kΔt − Δt/2, kΔt + Δt/2]` and the final point `N` represents
/// `[NΔt − Δt/2, NΔt]`. Because the kernel only depends on time differences,
/// each class of pair is stored once per lag.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaCoefficients {
    dt: f64,
    max_lag: usize,
    diag_interior: Complex64,
    diag_edge: Complex64,
    interior: Vec<Complex64>,
    start: Vec<Complex64>,
    end: Vec<Complex64>,
    end_start: Vec<Complex64>,
}

impl EtaCoefficients {
    /// A kernel that switches the bath off.
    pub fn zero(dt: f64, max_lag: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); max_lag + 1];
        Self {
            dt,
            max_lag,
            diag_interior: z[0],
            diag_edge: z[0],
            interior: z.clone(),
            start: z.clone(),
            end: z.clone(),
            end_start: z,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Largest `k − k'` available.
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// `η_{kk'}` for `0 ≤ k' ≤ k ≤ n_total`, where `n_total` is the index of
    /// the final time point of the path.
    ///
    /// # Panics
    /// If the indices are out of order or the lag exceeds [`Self::max_lag`].
    pub fn get(&self, k: usize, kp: usize, n_total: usize) -> Complex64 {
        assert!(kp <= k && k <= n_total, "invalid eta index ({k}, {kp}) for N = {n_total}");
        if n_total == 0 {
            return Complex64::new(0.0, 0.0);
        }
        if k == kp {
            return if k == 0 || k == n_total { self.diag_edge } else { self.diag_interior };
        }
        let lag = k - kp;
        assert!(lag <= self.max_lag, "eta lag {lag} beyond table size {}", self.max_lag);
        match (k == n_total, kp == 0) {
            (true, true) => self.end_start[lag],
            (true, false) => self.end[lag],
            (false, true) => self.start[lag],
            (false, false) => self.interior[lag],
        }
    }

    /// Interior-class value for lag `lag ≥ 1`, or the interior diagonal for 0.
    pub fn interior(&self, lag: usize) -> Complex64 {
        if lag == 0 {
            self.diag_interior
        } else {
            self.interior[lag]
        }
    }

    /// Removes the reorganization counterterm `μ s²` from the same-point
    /// terms, leaving the pure bath response.
    pub fn without_counterterm(&self, mu: f64) -> Self {
        let shift = |t: f64| Complex64::new(0.0, mu * t);
        Self {
            diag_interior: self.diag_interior - shift(self.dt),
            diag_edge: self.diag_edge - shift(0.5 * self.dt),
            ..self.clone()
        }
    }

    /// Copy with every pair beyond lag `keep` set to zero.
    pub fn truncated(&self, keep: usize) -> Self {
        let f = |v: &Vec<Complex64>| {
            v.iter()
                .enumerate()
                .map(|(lag, &x)| if lag > keep { Complex64::new(0.0, 0.0) } else { x })
                .collect()
        };
        Self {
            interior: f(&self.interior),
            start: f(&self.start),
            end: f(&self.end),
            end_start: f(&self.end_start),
            ..self.clone()
        }
    }

    /// Scales every entry, e.g. to combine baths with proportional couplings.
    pub fn scaled(&self, s: f64) -> Self {
        let f = |v: &Vec<Complex64>| v.iter().map(|x| x * s).collect();
        Self {
            dt: self.dt,
            max_lag: self.max_lag,
            diag_interior: self.diag_interior * s,
            diag_edge: self.diag_edge * s,
            interior: f(&self.interior),
            start: f(&self.start),
            end: f(&self.end),
            end_start: f(&self.end_start),
        }
    }
}

pub fn compute_eta(sd: &SpectralDensity, beta: f64, dt: f64, n: usize) -> Result<EtaCoefficients> {
    compute_eta_with(sd, beta, dt, n, ThermalWeight::Quantum)
}

pub fn compute_eta_with(
    sd: &SpectralDensity,
    beta: f64,
    dt: f64,
    n: usize,
    weight: ThermalWeight,
) -> Result<EtaCoefficients> {
    sd.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    if n == 0 {
        return Err(Error::invalid("eta table needs at least one step"));
    }
    let ctx = Kernel { sd, beta, weight };
    let h = 0.5 * dt;

    let diag_interior = ctx.same(dt, 1e-300).map_err(|_| Error::QuadratureFailed { k: 1, kp: 1 })?;
    let diag_edge = ctx.same(h, 1e-300).map_err(|_| Error::QuadratureFailed { k: 0, kp: 0 })?;
    let floor = 1e-13 * diag_interior.norm().max(diag_edge.norm());

    let mut interior = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut start = interior.clone();
    let mut end = interior.clone();
    let mut end_start = interior.clone();
    interior[0] = diag_interior;
    for lag in 1..=n {
        let l = lag as f64;
        let fail = |k, kp| Error::QuadratureFailed { k, kp };
        interior[lag] = ctx.pair(dt, dt, l * dt, floor).map_err(|_| fail(lag + 1, 1))?;
        start[lag] = ctx.pair(dt, h, l * dt - 0.25 * dt, floor).map_err(|_| fail(lag, 0))?;
        end[lag] = ctx.pair(h, dt, l * dt - 0.25 * dt, floor).map_err(|_| fail(lag + 1, 1))?;
        end_start[lag] = ctx.pair(h, h, l * dt - 0.5 * dt, floor).map_err(|_| fail(lag, 0))?;
    }
    Ok(EtaCoefficients {
        dt,
        max_lag: n,
        diag_interior,
        diag_edge,
        interior,
        start,
        end,
        end_start,
    })
}

struct Kernel<'a> {
    sd: &'a SpectralDensity,
    beta: f64,
    weight: ThermalWeight,
}

// Trigonometric kernel written as Σ coef·cos(freq·ω) (real part) and
// Σ coef·sin(freq·ω) (imaginary part); used for the asymptotic tail.
type Terms = Vec<(f64, f64)>;

impl Kernel<'_> {
    fn g_real(&self, w: f64) -> f64 {
        self.sd.evaluate(w) * self.weight.at(self.beta, w) / (PI * w * w)
    }

    fn g_imag(&self, w: f64) -> f64 {
        self.sd.evaluate(w) / (PI * w * w)
    }

    /// Both halves of one interval of length `t`.
    fn same(&self, t: f64, floor: f64) -> Result<Complex64, ()> {
        let f = |w: f64| {
            let s = (0.5 * w * t).sin();
            Complex64::new(self.g_real(w) * 2.0 * s * s, self.g_imag(w) * (w * t).sin())
        };
        let terms = vec![(1.0, 0.0), (-1.0, t)];
        self.integrate(&f, &terms, t, floor)
    }

    /// Intervals of lengths `a` and `c` whose centres are `d` apart.
    fn pair(&self, a: f64, c: f64, d: f64, floor: f64) -> Result<Complex64, ()> {
        let f = |w: f64| {
            let ss = 4.0 * (0.5 * w * a).sin() * (0.5 * w * c).sin();
            let (sin_d, cos_d) = (w * d).sin_cos();
            Complex64::new(self.g_real(w) * ss * cos_d, -self.g_imag(w) * ss * sin_d)
        };
        let (del, sig) = (0.5 * (a - c), 0.5 * (a + c));
        let terms = vec![(1.0, d + del), (1.0, d - del), (-1.0, d + sig), (-1.0, d - sig)];
        self.integrate(&f, &terms, d + sig, floor)
    }

    /// `f` must equal `g_real·Σ coef cos(freq ω) − i g_imag·Σ coef sin(freq ω)`
    /// over `terms`; that form is only used beyond the numerical cutoff.
    fn integrate(
        &self,
        f: &dyn Fn(f64) -> Complex64,
        terms: &Terms,
        max_freq: f64,
        floor: f64,
    ) -> Result<Complex64, ()> {
        let span = terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
        let zero_tol = 1e-12 * span.max(f64::MIN_POSITIVE);
        let a_min = terms
            .iter()
            .map(|t| t.1.abs())
            .filter(|&x| x > zero_tol)
            .fold(f64::INFINITY, f64::min);
        let scale = self.sd.scale();
        let (hi, tail) = match self.sd {
            SpectralDensity::Tabulated(t) => (*t.omega_grid().last().unwrap(), false),
            SpectralDensity::ExponentialCutoff(_) => (self.exp_cutoff_limit(), false),
            SpectralDensity::DrudeLorentz(_) => {
                let mut hi = (200.0 * scale).max(100.0 / a_min);
                if self.beta.is_finite() {
                    hi = hi.max(80.0 / self.beta);
                }
                (hi, true)
            }
        };
        let width = scale.min(PI / max_freq.max(f64::MIN_POSITIVE));
        let panels = ((hi / width).ceil() as usize).clamp(1, 200_000);
        let est = quad::integrate(f, 0.0, hi, panels, floor, 1e-11, 2_000_000).ok_or(())?;
        let mut value = est.value;
        if tail {
            for &(coef, freq) in terms {
                let af = freq.abs();
                if af <= zero_tol {
                    value.re += coef * self.tail_plain(hi, |w| self.g_real(w))?;
                } else {
                    let cre = tail_oscillatory(&|w| self.g_real(w), hi, af);
                    let cim = tail_oscillatory(&|w| self.g_imag(w), hi, af);
                    value.re += coef * cre.re;
                    value.im -= coef * freq.signum() * cim.im;
                }
            }
        }
        Ok(value)
    }

    fn exp_cutoff_limit(&self) -> f64 {
        let (w_peak, j_peak) = self.sd.peak();
        if j_peak <= 0.0 {
            return w_peak.max(1.0);
        }
        let mut hi = 2.0 * w_peak;
        while self.sd.evaluate(hi) > 1e-17 * j_peak {
            hi *= 1.5;
        }
        hi
    }

    fn tail_plain(&self, hi: f64, g: impl Fn(f64) -> f64) -> Result<f64, ()> {
        // ω = hi/u maps [hi, ∞) onto (0, 1]
        let h = |u: f64| if u <= 0.0 { 0.0 } else { g(hi / u) * hi / (u * u) };
        quad::integrate_real(&h, 0.0, 1.0, 4, 1e-12).ok_or(())
    }
}

/// `∫_Ω^∞ g(ω) e^{iaω} dω` from three terms of the integration-by-parts series.
fn tail_oscillatory(g: &dyn Fn(f64) -> f64, omega: f64, a: f64) -> Complex64 {
    let h = 1e-2 * omega;
    let g0 = g(omega);
    let (gp, gm) = (g(omega + h), g(omega - h));
    let d1 = (gp - gm) / (2.0 * h);
    let d2 = (gp - 2.0 * g0 + gm) / (h * h);
    let ia = Complex64::new(0.0, a);
    let phase = Complex64::new(0.0, a * omega).exp();
    -phase * (g0 / ia - d1 / (ia * ia) + d2 / (ia * ia * ia))
}
