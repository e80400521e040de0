use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

use super::spectral::DrudeLorentzSD;

/// Sum-over-poles form `C(t) = Σ_m c_m e^{−ν_m t}` of a Drude-Lorentz bath
/// correlation function, truncated after `num_modes` Matsubara terms.
#[derive(Clone, Debug, PartialEq)]
pub struct MatsubaraExpansion {
    pub nus: Vec<f64>,
    pub cs: Vec<Complex64>,
    pub num_modes: usize,
}

impl MatsubaraExpansion {
    pub fn correlation(&self, t: f64) -> Complex64 {
        self.nus.iter().zip(&self.cs).map(|(nu, c)| c * (-nu * t).exp()).sum()
    }
}

pub fn matsubara_expand(sd: &DrudeLorentzSD, beta: f64, num_modes: usize) -> Result<MatsubaraExpansion> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    if !(sd.gamma > 0.0 && sd.lambda >= 0.0 && sd.delta_s > 0.0) {
        return Err(Error::invalid(format!("invalid Drude-Lorentz parameters {sd:?}")));
    }
    let lam = sd.effective_lambda();
    let g = sd.gamma;
    let mut nus = Vec::with_capacity(num_modes + 1);
    let mut cs = Vec::with_capacity(num_modes + 1);
    nus.push(g);
    let cot = 1.0 / (beta * g / 2.0).tan();
    cs.push(Complex64::new(g * lam * cot, -g * lam));
    for m in 1..=num_modes {
        let nu = 2.0 * m as f64 * PI / beta;
        if ((nu - g) / nu).abs() < 1e-12 {
            return Err(Error::MatsubaraPole { m });
        }
        nus.push(nu);
        cs.push(Complex64::new(4.0 * lam * g / beta * nu / (nu * nu - g * g), 0.0));
    }
    Ok(MatsubaraExpansion { nus, cs, num_modes })
}
