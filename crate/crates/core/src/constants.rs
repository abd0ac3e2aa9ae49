//! Physical constants (CODATA 2018) used throughout the crate.
//!
//! Unit conventions, applied everywhere without exception:
//! frequencies are stored as *linear* frequencies `f` in GHz; angular
//! quantities (kappa, Rabi rates) are always derived on the spot and carry
//! rad/us or rad/ns units in their names. Times are ns inside pulse/dynamics
//! code and us for lifetimes.

/// Planck constant, J s (exact).
pub const PLANCK_H: f64 = 6.62607015e-34;

/// Reduced Planck constant, J s.
pub const PLANCK_HBAR: f64 = 1.054571817e-34;

/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN_KB: f64 = 1.380649e-23;

/// Magnetic flux quantum h/2e, Wb.
pub const FLUX_QUANTUM: f64 = 2.067833848e-15;

/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;
