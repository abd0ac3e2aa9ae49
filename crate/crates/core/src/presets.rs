//! Bundled reference devices.
//!
//! Two chips ship with the toolkit, `si` and `soi`, parameterized from
//! their published characterization values. Quantities the measurements do
//! not pin down (readout cloud geometry, assignment errors, thermal knob)
//! are illustrative defaults, marked as such in the shipped config files.

use crate::device::{
    ej_from_spectrum, CouplingSpec, DeviceSpec, FridgeSpec, ResonatorSpec, SquidSpec, TransmonSpec,
};
use crate::error::{Error, Result};
use crate::readout::{IqPoint, ReadoutModel};

/// Published reference values for one device, printed next to the derived
/// table by the parameter report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceValues {
    pub e_j_ghz: f64,
    pub g_mhz: f64,
    pub purcell_t1_us: f64,
    /// Purcell estimate under the Q ~ Q_e convention; only quoted for the
    /// silicon chip.
    pub purcell_t1_external_us: Option<f64>,
    pub t1_us: f64,
    pub t2_us: f64,
    pub rb_avg_clifford_fidelity: f64,
}

fn illustrative_readout() -> ReadoutModel {
    // 10 sigma cloud separation so assignment errors are dominated by the
    // explicit eps knobs; eps = 0.05 each gives visibility ~ 0.9
    ReadoutModel {
        mean_ground: IqPoint { i: 1.0, q: 0.0 },
        mean_excited: IqPoint { i: -1.0, q: 0.0 },
        sigma: 0.2,
        eps0: 0.05,
        eps1: 0.05,
    }
}

/// Reference device by name (`si` or `soi`).
pub fn device(name: &str) -> Result<DeviceSpec> {
    let spec = match name {
        "si" => DeviceSpec {
            name: "si".to_string(),
            transmon: TransmonSpec::from_spectrum(4.962, -0.260, 27.0, 6.6, 0.0)?,
            resonator: ResonatorSpec::new(6.868, 5.8e3, 12.9e3)?,
            coupling: chip_coupling(4.962, -0.260, 6.868, 0.0012)?,
            // junction inductance chosen consistent with the spectroscopic
            // E_J; the 22 nH figure belongs to the SOI chip
            squid: squid_for(4.962, -0.260, 24.96)?,
            fridge: FridgeSpec::new(7.0)?,
            readout: illustrative_readout(),
        },
        "soi" => DeviceSpec {
            name: "soi".to_string(),
            transmon: TransmonSpec::from_spectrum(5.652, -0.300, 3.5, 2.2, 0.0)?,
            resonator: ResonatorSpec::new(7.143, 45.8e3, 6.1e3)?,
            coupling: chip_coupling(5.652, -0.300, 7.143, 0.0035)?,
            squid: squid_for(5.652, -0.300, 22.0)?,
            fridge: FridgeSpec::new(7.0)?,
            readout: illustrative_readout(),
        },
        other => {
            return Err(Error::usage(format!(
                "unknown device preset '{other}' (available: si, soi)"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Published comparison columns for [`device`].
pub fn reference_values(name: &str) -> Result<ReferenceValues> {
    match name {
        "si" => Ok(ReferenceValues {
            e_j_ghz: 13.1,
            g_mhz: 135.0,
            purcell_t1_us: 18.5,
            purcell_t1_external_us: Some(57.0),
            t1_us: 27.0,
            t2_us: 6.6,
            rb_avg_clifford_fidelity: 0.9952,
        }),
        "soi" => Ok(ReferenceValues {
            e_j_ghz: 14.8,
            g_mhz: 177.0,
            purcell_t1_us: 8.5,
            purcell_t1_external_us: None,
            t1_us: 3.5,
            t2_us: 2.2,
            rb_avg_clifford_fidelity: 0.9860,
        }),
        other => Err(Error::usage(format!(
            "unknown device preset '{other}' (available: si, soi)"
        ))),
    }
}

fn chip_coupling(f_q: f64, eta_f: f64, f_r: f64, chi: f64) -> Result<CouplingSpec> {
    let transmon = TransmonSpec::from_spectrum(f_q, eta_f, 1.0, 1.0, 0.0)?;
    let resonator = ResonatorSpec::new(f_r, 1e4, 1e4)?;
    CouplingSpec::from_chi(chi, &transmon, &resonator)
}

fn squid_for(f_q: f64, eta_f: f64, l_j_nh: f64) -> Result<SquidSpec> {
    // biased at the flux-insensitive point, so E_J_max is the spectroscopic
    // E_J itself
    let e_j_max = ej_from_spectrum(f_q, eta_f)?;
    SquidSpec::new(e_j_max, l_j_nh, 2, 0.0)
}
