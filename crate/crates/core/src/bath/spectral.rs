use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// `J(ω) = (2π/Δs²) ξ ωⁿ ω_c^{1−n} e^{−ω/ω_c}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentialCutoffSD {
    pub xi: f64,
    pub omega_c: f64,
    pub n: f64,
    pub delta_s: f64,
}

impl ExponentialCutoffSD {
    /// Ohmic (`n = 1`) density with the spin-boson separation `Δs = 2`.
    pub fn ohmic(xi: f64, omega_c: f64) -> Self {
        Self {
            xi,
            omega_c,
            n: 1.0,
            delta_s: 2.0,
        }
    }

    fn prefactor(&self) -> f64 {
        2.0 * PI / (self.delta_s * self.delta_s) * self.xi * self.omega_c.powf(1.0 - self.n)
    }
}

/// `J(ω) = (2λ/Δs²) γω / (ω² + γ²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrudeLorentzSD {
    pub lambda: f64,
    pub gamma: f64,
    pub delta_s: f64,
}

impl DrudeLorentzSD {
    pub fn new(lambda: f64, gamma: f64, delta_s: f64) -> Self {
        Self { lambda, gamma, delta_s }
    }

    /// `λ/Δs²`, the reorganization scale entering the correlation function.
    pub fn effective_lambda(&self) -> f64 {
        self.lambda / (self.delta_s * self.delta_s)
    }
}

/// Whether a table stores `J(ω)` or `J(ω)/ω`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableMode {
    J,
    JOverOmega,
}

/// Spectral density sampled on an ascending frequency grid, linearly
/// interpolated inside the grid and zero outside it.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedSD {
    omega_grid: Vec<f64>,
    values: Vec<f64>,
    mode: TableMode,
}

impl TabulatedSD {
    pub fn new(omega_grid: Vec<f64>, values: Vec<f64>, mode: TableMode) -> Result<Self> {
        if omega_grid.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: omega_grid.len(),
                found: values.len(),
            });
        }
        if omega_grid.len() < 2 {
            return Err(Error::invalid("tabulated spectral density needs at least two points"));
        }
        if omega_grid[0] <= 0.0 || omega_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("tabulated frequencies must be positive and strictly ascending"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tabulated spectral density has non-finite values"));
        }
        Ok(Self {
            omega_grid,
            values,
            mode,
        })
    }

    pub fn omega_grid(&self) -> &[f64] {
        &self.omega_grid
    }

    pub fn mode(&self) -> TableMode {
        self.mode
    }

    fn interpolate(&self, omega: f64) -> f64 {
        let g = &self.omega_grid;
        if omega < g[0] || omega > g[g.len() - 1] {
            return 0.0;
        }
        let i = g.partition_point(|&w| w <= omega).clamp(1, g.len() - 1);
        let (w0, w1) = (g[i - 1], g[i]);
        let f = (omega - w0) / (w1 - w0);
        self.values[i - 1] * (1.0 - f) + self.values[i] * f
    }

    /// `J` sampled on the grid.
    pub fn j_on_grid(&self) -> Vec<f64> {
        match self.mode {
            TableMode::J => self.values.clone(),
            TableMode::JOverOmega => self.values.iter().zip(&self.omega_grid).map(|(v, w)| v * w).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpectralDensity {
    ExponentialCutoff(ExponentialCutoffSD),
    DrudeLorentz(DrudeLorentzSD),
    Tabulated(TabulatedSD),
}

impl From<ExponentialCutoffSD> for SpectralDensity {
    fn from(sd: ExponentialCutoffSD) -> Self {
        Self::ExponentialCutoff(sd)
    }
}

impl From<DrudeLorentzSD> for SpectralDensity {
    fn from(sd: DrudeLorentzSD) -> Self {
        Self::DrudeLorentz(sd)
    }
}

impl From<TabulatedSD> for SpectralDensity {
    fn from(sd: TabulatedSD) -> Self {
        Self::Tabulated(sd)
    }
}

impl SpectralDensity {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ExponentialCutoff(sd) => {
                if !(sd.xi >= 0.0 && sd.omega_c > 0.0 && sd.n > 0.0 && sd.delta_s > 0.0) {
                    return Err(Error::invalid(format!("invalid exponential-cutoff parameters {sd:?}")));
                }
            }
            Self::DrudeLorentz(sd) => {
                if !(sd.lambda >= 0.0 && sd.gamma > 0.0 && sd.delta_s > 0.0) {
                    return Err(Error::invalid(format!("invalid Drude-Lorentz parameters {sd:?}")));
                }
            }
            Self::Tabulated(_) => {}
        }
        Ok(())
    }

    /// `J(ω)` for `ω ≥ 0`.
    pub fn evaluate(&self, omega: f64) -> f64 {
        match self {
            Self::ExponentialCutoff(sd) => {
                if omega <= 0.0 {
                    0.0
                } else {
                    sd.prefactor() * omega.powf(sd.n) * (-omega / sd.omega_c).exp()
                }
            }
            Self::DrudeLorentz(sd) => {
                2.0 * sd.effective_lambda() * sd.gamma * omega / (omega * omega + sd.gamma * sd.gamma)
            }
            Self::Tabulated(t) => match t.mode {
                TableMode::J => t.interpolate(omega),
                TableMode::JOverOmega => omega * t.interpolate(omega),
            },
        }
    }

    /// `J(ω)/ω`, with its limit at `ω = 0` where finite.
    pub fn j_over_omega(&self, omega: f64) -> f64 {
        match self {
            Self::ExponentialCutoff(sd) => {
                if omega <= 0.0 {
                    if sd.n == 1.0 {
                        sd.prefactor()
                    } else if sd.n > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    sd.prefactor() * omega.powf(sd.n - 1.0) * (-omega / sd.omega_c).exp()
                }
            }
            Self::DrudeLorentz(sd) => 2.0 * sd.effective_lambda() * sd.gamma / (omega * omega + sd.gamma * sd.gamma),
            Self::Tabulated(t) => match t.mode {
                TableMode::J => {
                    if omega <= 0.0 {
                        0.0
                    } else {
                        t.interpolate(omega) / omega
                    }
                }
                TableMode::JOverOmega => t.interpolate(omega),
            },
        }
    }

    /// Characteristic frequency of the density.
    pub fn scale(&self) -> f64 {
        match self {
            Self::ExponentialCutoff(sd) => sd.omega_c * sd.n.max(1.0),
            Self::DrudeLorentz(sd) => sd.gamma,
            Self::Tabulated(t) => {
                let j = t.j_on_grid();
                let i = j
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map_or(0, |(i, _)| i);
                t.omega_grid[i]
            }
        }
    }

    /// Location and value of the maximum of `J`.
    pub fn peak(&self) -> (f64, f64) {
        match self {
            Self::ExponentialCutoff(sd) => {
                let w = sd.n * sd.omega_c;
                (w, self.evaluate(w))
            }
            Self::DrudeLorentz(sd) => (sd.gamma, self.evaluate(sd.gamma)),
            Self::Tabulated(t) => {
                let j = t.j_on_grid();
                let (i, v) = j
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map_or((0, 0.0), |(i, v)| (i, *v));
                (t.omega_grid[i], v)
            }
        }
    }

    /// Frequency beyond which `J` stays below `1e-10` of its peak.
    pub fn omega_max(&self) -> f64 {
        match self {
            Self::Tabulated(t) => *t.omega_grid.last().unwrap(),
            Self::DrudeLorentz(sd) => {
                // 2γω/(ω²+γ²) = 1e-10
                let r: f64 = 1e-10;
                sd.gamma * (1.0 + (1.0 - r * r).sqrt()) / r
            }
            Self::ExponentialCutoff(_) => {
                let (w_peak, j_peak) = self.peak();
                if j_peak <= 0.0 {
                    return w_peak.max(f64::MIN_POSITIVE);
                }
                let target = 1e-10 * j_peak;
                let mut hi = 2.0 * w_peak;
                while self.evaluate(hi) > target {
                    hi *= 2.0;
                }
                let mut lo = w_peak;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.evaluate(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// `(1/π) ∫ J(ω)/ω dω`, equal to `Σ_j c_j²/(2ω_j²)` for a discrete bath.
    pub fn reorganization(&self) -> f64 {
        match self {
            Self::ExponentialCutoff(sd) => {
                // ∫ ω^{n-1} e^{-ω/ωc} = Γ(n) ωc^n
                sd.prefactor() * statrs::function::gamma::gamma(sd.n) * sd.omega_c.powf(sd.n) / PI
            }
            Self::DrudeLorentz(sd) => sd.effective_lambda(),
            Self::Tabulated(t) => {
                let g = &t.omega_grid;
                let f: Vec<f64> = g.iter().map(|&w| self.j_over_omega(w)).collect();
                trapezoid(g, &f) / PI
            }
        }
    }

    /// Numerical `(1/π) ∫ f(ω) J(ω) dω` over the support, for diagnostics.
    #[cfg(test)]
    pub(crate) fn integrate_weighted(&self, f: impl Fn(f64) -> f64) -> f64 {
        let g = |w: f64| f(w) * self.evaluate(w);
        let hi = match self {
            Self::DrudeLorentz(sd) => 1e6 * sd.gamma,
            _ => self.omega_max(),
        };
        super::quad::integrate_real(&g, 0.0, hi, 64, 1e-12).unwrap_or(f64::NAN) / PI
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(w, v)| 0.5 * (w[1] - w[0]) * (v[0] + v[1])).sum()
}

/// Reads a two-column tabulated spectral density.
///
/// Lines starting with `#` are comments. A comment of the form
/// `# mode: J` or `# mode: J/omega` selects what the second column holds
/// (`J` when absent).
pub fn read_tabulated(path: impl AsRef<Path>) -> Result<TabulatedSD> {
    parse_tabulated(&std::fs::read_to_string(path)?)
}

pub(crate) fn parse_tabulated(text: &str) -> Result<TabulatedSD> {
    let mut mode = TableMode::J;
    let mut omegas = Vec::new();
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(rest) = comment.trim().strip_prefix("mode:") {
                mode = match rest.trim().to_ascii_lowercase().as_str() {
                    "j" => TableMode::J,
                    "j/omega" | "j/w" | "j_over_omega" => TableMode::JOverOmega,
                    other => {
                        return Err(Error::Parse {
                            line: lineno,
                            message: format!("unknown table mode `{other}`"),
                        })
                    }
                };
            }
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected two columns, found {}", cols.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("`{s}`: {e}"),
            })
        };
        omegas.push(parse(cols[0])?);
        values.push(parse(cols[1])?);
    }
    TabulatedSD::new(omegas, values, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_cutoff_at_cutoff() {
        let sd = SpectralDensity::from(ExponentialCutoffSD::ohmic(0.1, 7.5));
        let want = 2.0 * PI / 4.0 * 0.1 * 7.5 * (-1.0f64).exp();
        assert!((sd.evaluate(7.5) - want).abs() < 1e-15);
    }

    #[test]
    fn zero_at_origin() {
        let sds: [SpectralDensity; 3] = [
            ExponentialCutoffSD::ohmic(0.1, 7.5).into(),
            DrudeLorentzSD::new(1.0, 2.0, 2.0).into(),
            ExponentialCutoffSD { xi: 0.3, omega_c: 2.0, n: 0.5, delta_s: 2.0 }.into(),
        ];
        for sd in &sds {
            assert_eq!(sd.evaluate(0.0), 0.0);
        }
    }

    #[test]
    fn drude_lorentz_peak() {
        let sd = SpectralDensity::from(DrudeLorentzSD::new(3.0, 0.7, 2.0));
        let peak = sd.evaluate(0.7);
        assert!((peak - 3.0 / 4.0).abs() < 1e-15);
        for w in [0.5, 0.69, 0.71, 1.0] {
            assert!(sd.evaluate(w) < peak);
        }
    }

    #[test]
    fn analytic_reorganization_matches_quadrature() {
        let sds: [SpectralDensity; 3] = [
            ExponentialCutoffSD::ohmic(0.1, 7.5).into(),
            ExponentialCutoffSD { xi: 0.2, omega_c: 1.5, n: 2.5, delta_s: 1.0 }.into(),
            DrudeLorentzSD::new(1.2, 0.8, 1.0).into(),
        ];
        for sd in &sds {
            let numeric = sd.integrate_weighted(|w| 1.0 / w);
            assert!((numeric / sd.reorganization() - 1.0).abs() < 1e-6, "{sd:?}: {numeric}");
        }
    }

    #[test]
    fn omega_max_bounds_the_tail() {
        let sd = SpectralDensity::from(ExponentialCutoffSD::ohmic(0.1, 7.5));
        let wm = sd.omega_max();
        let (_, jp) = sd.peak();
        assert!((sd.evaluate(wm) / jp - 1e-10).abs() < 1e-12);
    }

    #[test]
    fn table_interpolation_and_modes() {
        let t = TabulatedSD::new(vec![1.0, 2.0, 4.0], vec![1.0, 3.0, 1.0], TableMode::J).unwrap();
        let sd = SpectralDensity::from(t);
        assert_eq!(sd.evaluate(1.5), 2.0);
        assert_eq!(sd.evaluate(3.0), 2.0);
        assert_eq!(sd.evaluate(0.5), 0.0);
        assert_eq!(sd.evaluate(5.0), 0.0);
        let t = TabulatedSD::new(vec![1.0, 2.0], vec![2.0, 2.0], TableMode::JOverOmega).unwrap();
        assert_eq!(SpectralDensity::from(t).evaluate(1.5), 3.0);
    }

    #[test]
    fn table_validation() {
        assert!(TabulatedSD::new(vec![1.0], vec![1.0], TableMode::J).is_err());
        assert!(TabulatedSD::new(vec![2.0, 1.0], vec![1.0, 1.0], TableMode::J).is_err());
        assert!(TabulatedSD::new(vec![0.0, 1.0], vec![1.0, 1.0], TableMode::J).is_err());
        assert!(TabulatedSD::new(vec![1.0, 2.0], vec![1.0], TableMode::J).is_err());
    }

    #[test]
    fn parse_table_file() {
        let text = "# spectral density\n# mode: J/omega\n1.0 2.0\n\n2.0   4.0\n";
        let t = parse_tabulated(text).unwrap();
        assert_eq!(t.mode(), TableMode::JOverOmega);
        assert_eq!(t.j_on_grid(), vec![2.0, 8.0]);
        let err = parse_tabulated("1.0 2.0\n2.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_tabulated("# mode: bogus\n1 1\n2 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(matches!(parse_tabulated("1 x\n").unwrap_err(), Error::Parse { line: 1, .. }));
    }

    proptest::proptest! {
        #[test]
        fn parametric_densities_non_negative(
            w in 0.0f64..1e3, xi in 0.0f64..5.0, wc in 0.01f64..50.0, n in 0.2f64..4.0,
            lambda in 0.0f64..10.0, gamma in 0.01f64..10.0,
        ) {
            let e = SpectralDensity::from(ExponentialCutoffSD { xi, omega_c: wc, n, delta_s: 2.0 });
            let d = SpectralDensity::from(DrudeLorentzSD::new(lambda, gamma, 1.0));
            proptest::prop_assert!(e.evaluate(w) >= 0.0);
            proptest::prop_assert!(d.evaluate(w) >= 0.0);
        }
    }
}
