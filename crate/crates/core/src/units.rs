//! Unit conversions between spectroscopic and atomic units.

/// Wavenumbers (cm⁻¹) to Hartree.
pub const INVCM2AU: f64 = 4.55633e-6;
/// Atomic units of time to femtoseconds.
pub const AU2FS: f64 = 0.02418884254;
/// Boltzmann constant in Hartree per Kelvin.
pub const KB_AU: f64 = 3.166_811_563_455_6e-6;

/// Named conversion table, for callers that prefer a value over constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitTable {
    pub invcm2au: f64,
    pub au2fs: f64,
}

impl Default for UnitTable {
    fn default() -> Self {
        Self {
            invcm2au: INVCM2AU,
            au2fs: AU2FS,
        }
    }
}

impl UnitTable {
    pub fn energy_to_au(&self, invcm: f64) -> f64 {
        invcm * self.invcm2au
    }

    pub fn energy_from_au(&self, au: f64) -> f64 {
        au / self.invcm2au
    }

    pub fn time_to_au(&self, fs: f64) -> f64 {
        fs / self.au2fs
    }

    pub fn time_from_au(&self, au: f64) -> f64 {
        au * self.au2fs
    }
}

/// Inverse temperature in Hartree⁻¹ for a temperature in Kelvin.
pub fn kelvin_to_beta(kelvin: f64) -> f64 {
    1.0 / (KB_AU * kelvin)
}
