//! Reduced dynamics of a small quantum system coupled to harmonic environments.
//!
//! Every propagation method works on the same primitives: an [`Operator`] for
//! Hamiltonians and coupling operators, a [`DensityMatrix`] for the reduced
//! state, and a [`Trajectory`] for the resulting time series.
//!
//! * [`empirical`]: isolated (possibly non-Hermitian) systems and Lindblad
//!   master equations.
//! * [`redfield`]: the Bloch-Redfield master equation.
//! * [`heom`]: scaled and unscaled hierarchical equations of motion.
//! * [`pathint`]: QuAPI, blip-decomposed augmented propagators and a
//!   brute-force path sum.
//! * [`ttm`]: the transfer tensor method.
//! * [`qcpi`]: quantum-classical path integrals with harmonic solvents.
//!
//! Internal units have ħ = 1; see [`units`] for the spectroscopic conversions.

pub mod bath;
pub mod empirical;
mod error;
pub mod heom;
pub mod integrator;
pub mod linalg;
mod operator;
pub mod pathint;
pub mod qcpi;
pub mod redfield;
mod trajectory;
pub mod ttm;
pub mod units;

pub use bath::{
    DiscreteBathModes, DrudeLorentzSD, EtaCoefficients, ExponentialCutoffSD, MatsubaraExpansion,
    SpectralDensity, TabulatedSD,
};
pub use error::{Error, Result};
pub use integrator::IntegratorConfig;
pub use linalg::CMatrix;
pub use operator::{
    apply_propagator, create_nn_hamiltonian, create_tls_hamiltonian, AugmentedPropagatorSeries,
    DensityMatrix, ExternalField, Operator,
};
pub use trajectory::Trajectory;

pub use num_complex::Complex64;
