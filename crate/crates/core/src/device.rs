//! Closed-form circuit-QED parameter relations and the device description
//! they hang off of.
//!
//! Every derived quantity (E_J, E_C, g, Delta, kappa, Purcell T1, thermal
//! occupation) is computed from the stored primitives through the functions
//! in this module, and cross-checked at construction time.

use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN_KB, FLUX_QUANTUM, PLANCK_H};
use crate::error::{Error, Result};
use crate::readout::ReadoutModel;

/// E_C from the anharmonicity: E_C = -eta (both as linear frequency, GHz).
pub fn ec_from_anharmonicity(eta_f: f64) -> Result<f64> {
    if eta_f >= 0.0 {
        return Err(Error::domain(format!(
            "anharmonicity must be negative for a transmon, got {eta_f} GHz"
        )));
    }
    Ok(-eta_f)
}

/// Qubit transition frequency f_q = sqrt(8 E_J E_C) - E_C, all in GHz.
pub fn transmon_frequency(e_j: f64, e_c: f64) -> Result<f64> {
    if e_j <= 0.0 || e_c <= 0.0 {
        return Err(Error::domain(format!(
            "E_J and E_C must be positive, got E_J = {e_j}, E_C = {e_c} GHz"
        )));
    }
    Ok((8.0 * e_j * e_c).sqrt() - e_c)
}

/// Josephson energy implied by a measured (f_q, eta) pair:
/// E_J = (f_q + E_C)^2 / (8 E_C) with E_C = -eta.
pub fn ej_from_spectrum(f_q: f64, eta_f: f64) -> Result<f64> {
    if f_q <= 0.0 {
        return Err(Error::domain(format!("qubit frequency must be positive, got {f_q} GHz")));
    }
    let e_c = ec_from_anharmonicity(eta_f)?;
    Ok((f_q + e_c).powi(2) / (8.0 * e_c))
}

/// Josephson energy (GHz) of `n_parallel` identical junctions of inductance
/// `l_j_nh` nH each: E_J/h = (Phi_0 / 2 pi)^2 / L_total / h.
pub fn ej_from_inductance(l_j_nh: f64, n_parallel: u32) -> Result<f64> {
    if l_j_nh <= 0.0 || n_parallel == 0 {
        return Err(Error::domain(format!(
            "need positive inductance and at least one junction, got {l_j_nh} nH x {n_parallel}"
        )));
    }
    let l_total = l_j_nh * 1e-9 / n_parallel as f64;
    let e_j_joule = (FLUX_QUANTUM / (2.0 * std::f64::consts::PI)).powi(2) / l_total;
    Ok(e_j_joule / PLANCK_H / 1e9)
}

/// Flux-tuned Josephson energy of a symmetric two-junction SQUID:
/// E_J(Phi) = E_J_max |cos(pi Phi)| with Phi in units of Phi_0.
pub fn squid_ej(e_j_max: f64, flux: f64) -> Result<f64> {
    if e_j_max <= 0.0 {
        return Err(Error::domain(format!("E_J_max must be positive, got {e_j_max} GHz")));
    }
    Ok(e_j_max * (std::f64::consts::PI * flux).cos().abs())
}

/// Vacuum coupling rate from the dispersive shift:
/// g = sqrt(-Delta * chi * (1 + Delta/eta)), all linear GHz.
pub fn coupling_from_chi(chi: f64, delta: f64, eta_f: f64) -> Result<f64> {
    if eta_f == 0.0 {
        return Err(Error::domain("anharmonicity must be nonzero".to_string()));
    }
    let radicand = -delta * chi * (1.0 + delta / eta_f);
    if radicand < 0.0 {
        return Err(Error::domain(format!(
            "negative radicand in g = sqrt(-Delta chi (1 + Delta/eta)): \
             chi = {chi}, Delta = {delta}, eta = {eta_f} GHz are inconsistent"
        )));
    }
    Ok(radicand.sqrt())
}

/// Dispersive half-shift from the coupling rate, inverse of
/// [`coupling_from_chi`]: chi = -g^2 / (Delta (1 + Delta/eta)).
pub fn chi_from_coupling(g: f64, delta: f64, eta_f: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::domain("qubit-resonator detuning must be nonzero".to_string()));
    }
    if eta_f == 0.0 {
        return Err(Error::domain("anharmonicity must be nonzero".to_string()));
    }
    let factor = 1.0 + delta / eta_f;
    if factor == 0.0 {
        return Err(Error::domain(format!(
            "1 + Delta/eta vanishes (Delta = {delta}, eta = {eta_f} GHz); chi is undefined"
        )));
    }
    Ok(-g * g / (delta * factor))
}

/// Single-mode Purcell lifetime estimate (Delta/g)^2 / kappa, in us.
///
/// `delta` and `g` are linear GHz; `kappa_rad_per_us` is the angular
/// resonator linewidth in rad/us.
pub fn purcell_t1(delta: f64, g: f64, kappa_rad_per_us: f64) -> Result<f64> {
    if g <= 0.0 || kappa_rad_per_us <= 0.0 {
        return Err(Error::domain(format!(
            "need positive g and kappa, got g = {g} GHz, kappa = {kappa_rad_per_us} rad/us"
        )));
    }
    Ok((delta / g).powi(2) / kappa_rad_per_us)
}

/// Equilibrium excited-state occupation of a two-level system at
/// temperature `temperature_mk` (mK): p = 1 / (1 + exp(h f / k_B T)).
pub fn thermal_population(f_q_ghz: f64, temperature_mk: f64) -> Result<f64> {
    if temperature_mk <= 0.0 {
        return Err(Error::domain(format!(
            "temperature must be positive, got {temperature_mk} mK"
        )));
    }
    let ratio = PLANCK_H * f_q_ghz * 1e9 / (BOLTZMANN_KB * temperature_mk * 1e-3);
    Ok(1.0 / (1.0 + ratio.exp()))
}

/// Tolerance for the mutual-consistency checks run at construction time.
const CONSISTENCY_GHZ: f64 = 1e-6;

/// Relative tolerance tying the SQUID inductance to the spectroscopic E_J.
const SQUID_EJ_REL_TOL: f64 = 0.02;

/// Qubit parameters. Frequencies are linear GHz, lifetimes us.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmonSpec {
    pub f_q: f64,
    /// Anharmonicity f_21 - f_10, negative.
    pub eta_f: f64,
    pub e_j: f64,
    pub e_c: f64,
    /// Energy relaxation time, us. `f64::INFINITY` disables relaxation.
    pub t1: f64,
    /// Ramsey coherence time, us. `f64::INFINITY` disables dephasing.
    pub t2: f64,
    /// Equilibrium excited-state occupation in [0, 0.5).
    pub thermal_population: f64,
}

impl TransmonSpec {
    /// Build from the spectroscopic observables, deriving E_J and E_C.
    pub fn from_spectrum(
        f_q: f64,
        eta_f: f64,
        t1: f64,
        t2: f64,
        thermal_population: f64,
    ) -> Result<Self> {
        let e_c = ec_from_anharmonicity(eta_f)?;
        let e_j = ej_from_spectrum(f_q, eta_f)?;
        let spec = Self { f_q, eta_f, e_j, e_c, t1, t2, thermal_population };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta_f >= 0.0 || self.e_c <= 0.0 || self.e_j <= 0.0 {
            return Err(Error::domain(format!(
                "transmon needs eta < 0 < E_C, E_J; got eta = {}, E_C = {}, E_J = {}",
                self.eta_f, self.e_c, self.e_j
            )));
        }
        let ratio = self.e_j / self.e_c;
        if ratio < 10.0 {
            return Err(Error::domain(format!(
                "E_J/E_C = {ratio:.2} is below the transmon limit (need >= 10)"
            )));
        }
        if self.t1.is_nan() || self.t1 <= 0.0 || self.t2.is_nan() || self.t2 <= 0.0 {
            return Err(Error::domain(format!(
                "lifetimes must be positive, got T1 = {}, T2 = {} us",
                self.t1, self.t2
            )));
        }
        if self.t2 > 2.0 * self.t1 {
            return Err(Error::domain(format!(
                "T2 = {} us exceeds the physical bound 2 T1 = {} us",
                self.t2,
                2.0 * self.t1
            )));
        }
        if !(0.0..0.5).contains(&self.thermal_population) {
            return Err(Error::domain(format!(
                "thermal population must lie in [0, 0.5), got {}",
                self.thermal_population
            )));
        }
        let f_check = transmon_frequency(self.e_j, self.e_c)?;
        if (f_check - self.f_q).abs() > CONSISTENCY_GHZ {
            return Err(Error::domain(format!(
                "(f_q, eta, E_J, E_C) inconsistent: stored f_q = {} GHz, \
                 sqrt(8 E_J E_C) - E_C = {} GHz",
                self.f_q, f_check
            )));
        }
        Ok(())
    }
}

/// Readout resonator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorSpec {
    pub f_r: f64,
    pub q_internal: f64,
    pub q_external: f64,
}

impl ResonatorSpec {
    pub fn new(f_r: f64, q_internal: f64, q_external: f64) -> Result<Self> {
        let spec = Self { f_r, q_internal, q_external };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.f_r <= 0.0 || self.q_internal <= 0.0 || self.q_external <= 0.0 {
            return Err(Error::domain(format!(
                "resonator needs positive f_r and Qs, got f_r = {}, Q_i = {}, Q_e = {}",
                self.f_r, self.q_internal, self.q_external
            )));
        }
        Ok(())
    }

    /// Loaded quality factor, 1/Q = 1/Q_i + 1/Q_e.
    pub fn q_total(&self) -> f64 {
        1.0 / (1.0 / self.q_internal + 1.0 / self.q_external)
    }

    /// Angular linewidth kappa = 2 pi f_r / Q_total, rad/us.
    pub fn kappa_rad_per_us(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f_r * 1e3 / self.q_total()
    }
}

/// Qubit-resonator coupling. `g` and `chi` are linear GHz; `chi` is the
/// half-shift, so the |0>/|1> resonator pull is 2 chi.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub g: f64,
    pub chi: f64,
    /// Qubit-resonator detuning f_q - f_r, GHz.
    pub delta: f64,
}

impl CouplingSpec {
    /// Derive g from the measured dispersive shift.
    pub fn from_chi(chi: f64, transmon: &TransmonSpec, resonator: &ResonatorSpec) -> Result<Self> {
        let delta = transmon.f_q - resonator.f_r;
        let g = coupling_from_chi(chi, delta, transmon.eta_f)?;
        Ok(Self { g, chi, delta })
    }

    pub fn validate(&self, eta_f: f64) -> Result<()> {
        let g_check = coupling_from_chi(self.chi, self.delta, eta_f)?;
        if (g_check - self.g).abs() > CONSISTENCY_GHZ {
            return Err(Error::domain(format!(
                "(g, chi) inconsistent: stored g = {} GHz, from chi = {} GHz",
                self.g, g_check
            )));
        }
        Ok(())
    }
}

/// Flux-tunable SQUID replacing the single junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquidSpec {
    pub e_j_max: f64,
    pub l_j_per_junction_nh: f64,
    pub n_junctions: u32,
    /// External flux bias in units of Phi_0. Shipped configs sit at the
    /// first-order flux-insensitive point, flux = 0.
    pub flux: f64,
}

impl SquidSpec {
    pub fn new(e_j_max: f64, l_j_per_junction_nh: f64, n_junctions: u32, flux: f64) -> Result<Self> {
        let spec = Self { e_j_max, l_j_per_junction_nh, n_junctions, flux };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let from_inductance = ej_from_inductance(self.l_j_per_junction_nh, self.n_junctions)?;
        let rel = (from_inductance - self.e_j_max).abs() / self.e_j_max;
        if rel > SQUID_EJ_REL_TOL {
            return Err(Error::domain(format!(
                "E_J_max = {} GHz disagrees with the junction inductance value {} GHz by {:.1}% \
                 (allowed {:.0}%)",
                self.e_j_max,
                from_inductance,
                rel * 100.0,
                SQUID_EJ_REL_TOL * 100.0
            )));
        }
        Ok(())
    }

    /// E_J at the configured flux bias.
    pub fn e_j(&self) -> f64 {
        self.e_j_max * (std::f64::consts::PI * self.flux).cos().abs()
    }
}

/// Cryostat description; only used to derive the thermal occupation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FridgeSpec {
    pub temperature_mk: f64,
}

impl FridgeSpec {
    pub fn new(temperature_mk: f64) -> Result<Self> {
        if temperature_mk <= 0.0 {
            return Err(Error::domain(format!(
                "fridge temperature must be positive, got {temperature_mk} mK"
            )));
        }
        Ok(Self { temperature_mk })
    }
}

/// Full parameterization of one simulated chip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub name: String,
    pub transmon: TransmonSpec,
    pub resonator: ResonatorSpec,
    pub coupling: CouplingSpec,
    pub squid: SquidSpec,
    pub fridge: FridgeSpec,
    pub readout: ReadoutModel,
}

impl DeviceSpec {
    /// Validate every stored and derived quantity against the module
    /// invariants; called after construction and after config loading.
    pub fn validate(&self) -> Result<()> {
        self.transmon.validate()?;
        self.resonator.validate()?;
        self.coupling.validate(self.transmon.eta_f)?;
        self.squid.validate()?;
        self.readout.validate()?;
        FridgeSpec::new(self.fridge.temperature_mk)?;
        let squid_ej_at_bias = self.squid.e_j();
        let rel = (squid_ej_at_bias - self.transmon.e_j).abs() / self.transmon.e_j;
        if rel > SQUID_EJ_REL_TOL {
            return Err(Error::domain(format!(
                "SQUID E_J at flux bias ({} GHz) disagrees with spectroscopic E_J ({} GHz) \
                 by {:.1}%",
                squid_ej_at_bias,
                self.transmon.e_j,
                rel * 100.0
            )));
        }
        Ok(())
    }

    /// Purcell T1 estimate with the loaded Q, us.
    pub fn purcell_t1_loaded(&self) -> Result<f64> {
        purcell_t1(self.coupling.delta, self.coupling.g, self.resonator.kappa_rad_per_us())
    }

    /// Purcell T1 estimate taking Q ~ Q_e (external-limited convention), us.
    pub fn purcell_t1_external(&self) -> Result<f64> {
        let kappa = 2.0 * std::f64::consts::PI * self.resonator.f_r * 1e3 / self.resonator.q_external;
        purcell_t1(self.coupling.delta, self.coupling.g, kappa)
    }

    /// Thermal occupation implied by the fridge temperature (the stored
    /// `transmon.thermal_population` knob is what simulations actually use).
    pub fn thermal_population_from_fridge(&self) -> Result<f64> {
        thermal_population(self.transmon.f_q, self.fridge.temperature_mk)
    }
}
