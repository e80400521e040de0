//! Harmonic environments: spectral densities, their discretization into
//! modes, the Matsubara expansion of the Drude-Lorentz correlation function,
//! and the discretized influence-functional kernel.

mod discretize;
mod eta;
mod matsubara;
pub(crate) mod quad;
mod spectral;

pub use discretize::{discretize, DiscreteBathModes};
pub use eta::{compute_eta, compute_eta_with, EtaCoefficients, ThermalWeight};
pub use matsubara::{matsubara_expand, MatsubaraExpansion};
pub use spectral::{
    read_tabulated, DrudeLorentzSD, ExponentialCutoffSD, SpectralDensity, TableMode, TabulatedSD,
};
