//! Shared model problems for the benchmarks.

use qdyn::bath::discretize;
use qdyn::qcpi::HarmonicBathSolvent;
use qdyn::{create_tls_hamiltonian, DrudeLorentzSD, ExponentialCutoffSD, Operator, SpectralDensity};

/// Symmetric spin-boson model with an Ohmic bath, ξ = 0.1, ωc = 7.5.
pub fn spin_boson() -> (Operator, SpectralDensity) {
    (create_tls_hamiltonian(1.0, 1.0), ExponentialCutoffSD::ohmic(0.1, 7.5).into())
}

pub fn drude() -> DrudeLorentzSD {
    DrudeLorentzSD::new(0.25, 5.0, 2.0)
}

pub fn solvent(modes: usize, n_points: usize) -> HarmonicBathSolvent {
    let (_, sd) = spin_boson();
    HarmonicBathSolvent::new(5.0, discretize(&sd, modes).unwrap(), vec![1.0, -1.0], n_points, 1).unwrap()
}
