//! TOML run configuration: a `[device]` section carrying every chip
//! parameter, an optional `[experiment]` section, a seed, and an optional
//! published-reference table for the parameter report. Unknown keys are
//! rejected everywhere.

use serde::{Deserialize, Serialize};

use crate::clifford::PhysicalGate;
use crate::device::{
    CouplingSpec, DeviceSpec, FridgeSpec, ResonatorSpec, SquidSpec, TransmonSpec,
};
use crate::dynamics::StateDim;
use crate::error::{Error, Result};
use crate::experiments::{
    ExperimentPlan, Grid, PlanKind, RbNoise, RbPlan, VnaConditioning,
};
use crate::presets::ReferenceValues;
use crate::pulse::{GateSet, Shape};
use crate::readout::{IqPoint, ReadoutModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceConfig,
    #[serde(default)]
    pub experiment: Option<ExperimentConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Output directory; the CLI falls back to its environment default.
    #[serde(default)]
    pub output: Option<String>,
    /// Published comparison values for the parameter report.
    #[serde(default)]
    pub reference: Option<ReferenceValues>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse error: {e}")))?;
        config.device.build()?; // surface device problems immediately
        Ok(config)
    }

    pub fn device_spec(&self) -> Result<DeviceSpec> {
        self.device.build()
    }

    /// Resolve the experiment plan, applying CLI overrides.
    pub fn plan(&self, seed_override: Option<u64>, shots_override: Option<u64>) -> Result<ExperimentPlan> {
        let experiment = self
            .experiment
            .as_ref()
            .ok_or_else(|| Error::config("config has no [experiment] section".to_string()))?;
        let seed = seed_override.or(self.seed).unwrap_or(0);
        let mut plan = experiment.build(seed)?;
        if let Some(shots) = shots_override {
            plan.shots_per_point = shots;
        }
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub name: String,
    pub transmon: TransmonConfig,
    pub resonator: ResonatorConfig,
    pub coupling: CouplingConfig,
    pub squid: SquidConfig,
    pub fridge: FridgeConfig,
    pub readout: ReadoutConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonConfig {
    pub f_q_ghz: f64,
    /// Negative anharmonicity f_21 - f_10, GHz.
    pub anharmonicity_ghz: f64,
    pub t1_us: f64,
    pub t2_us: f64,
    #[serde(default)]
    pub thermal_population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorConfig {
    pub f_r_ghz: f64,
    pub q_internal: f64,
    pub q_external: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    /// Dispersive half-shift chi, GHz.
    pub chi_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquidConfig {
    pub l_j_per_junction_nh: f64,
    #[serde(default = "default_n_junctions")]
    pub n_junctions: u32,
    /// External flux in units of the flux quantum.
    #[serde(default)]
    pub flux: f64,
}

fn default_n_junctions() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FridgeConfig {
    pub temperature_mk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    pub mean_ground: [f64; 2],
    pub mean_excited: [f64; 2],
    pub sigma: f64,
    pub eps0: f64,
    pub eps1: f64,
}

impl DeviceConfig {
    pub fn build(&self) -> Result<DeviceSpec> {
        let transmon = TransmonSpec::from_spectrum(
            self.transmon.f_q_ghz,
            self.transmon.anharmonicity_ghz,
            self.transmon.t1_us,
            self.transmon.t2_us,
            self.transmon.thermal_population,
        )?;
        let resonator = ResonatorSpec::new(
            self.resonator.f_r_ghz,
            self.resonator.q_internal,
            self.resonator.q_external,
        )?;
        let coupling = CouplingSpec::from_chi(self.coupling.chi_ghz, &transmon, &resonator)?;
        // at the configured bias the SQUID must supply the spectroscopic
        // E_J, so E_J_max is E_J / |cos(pi flux)|
        let bias = (std::f64::consts::PI * self.squid.flux).cos().abs();
        if bias < 1e-9 {
            return Err(Error::config(
                "flux bias sits at full frustration; the qubit frequency is undefined".to_string(),
            ));
        }
        let squid = SquidSpec::new(
            transmon.e_j / bias,
            self.squid.l_j_per_junction_nh,
            self.squid.n_junctions,
            self.squid.flux,
        )?;
        let fridge = FridgeSpec::new(self.fridge.temperature_mk)?;
        let readout = ReadoutModel {
            mean_ground: IqPoint { i: self.readout.mean_ground[0], q: self.readout.mean_ground[1] },
            mean_excited: IqPoint {
                i: self.readout.mean_excited[0],
                q: self.readout.mean_excited[1],
            },
            sigma: self.readout.sigma,
            eps0: self.readout.eps0,
            eps1: self.readout.eps1,
        };
        let spec = DeviceSpec {
            name: self.name.clone(),
            transmon,
            resonator,
            coupling,
            squid,
            fridge,
            readout,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Flat experiment section; which fields are required (and allowed)
/// depends on `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: String,
    #[serde(default)]
    pub shots_per_point: Option<u64>,
    #[serde(default)]
    pub tau: Option<Grid>,
    #[serde(default)]
    pub detuning: Option<Grid>,
    #[serde(default)]
    pub detuning_ghz: Option<f64>,
    #[serde(default)]
    pub frequency: Option<Grid>,
    #[serde(default)]
    pub lengths: Option<Vec<u64>>,
    #[serde(default)]
    pub n_sequences: Option<u64>,
    #[serde(default)]
    pub interleaved_gate: Option<String>,
    #[serde(default)]
    pub rb_noise: Option<String>,
    #[serde(default)]
    pub clifford_depolarizing: Option<f64>,
    #[serde(default)]
    pub gate_depolarizing: Option<f64>,
    #[serde(default)]
    pub drive_amplitude_rad_per_ns: Option<f64>,
    #[serde(default)]
    pub conditioned: Option<String>,
    #[serde(default)]
    pub snr: Option<f64>,
    #[serde(default)]
    pub dimension: Option<u32>,
    #[serde(default)]
    pub dt_ns: Option<f64>,
    #[serde(default)]
    pub gate_duration_ns: Option<f64>,
    #[serde(default)]
    pub gate_shape: Option<String>,
    #[serde(default)]
    pub sigma_fraction: Option<f64>,
    #[serde(default)]
    pub readout_duration_ns: Option<f64>,
}

fn parse_gate(name: &str) -> Result<PhysicalGate> {
    Ok(match name {
        "i" => PhysicalGate::I,
        "x_pi" => PhysicalGate::XPi,
        "x_half" => PhysicalGate::XHalf,
        "x_half_neg" => PhysicalGate::XHalfNeg,
        "y_pi" => PhysicalGate::YPi,
        "y_half" => PhysicalGate::YHalf,
        "y_half_neg" => PhysicalGate::YHalfNeg,
        other => {
            return Err(Error::config(format!(
                "unknown gate '{other}' (expected i, x_pi, x_half, x_half_neg, y_pi, y_half, \
                 y_half_neg)"
            )))
        }
    })
}

impl ExperimentConfig {
    fn require<T: Clone>(field: &Option<T>, name: &str, kind: &str) -> Result<T> {
        field
            .clone()
            .ok_or_else(|| Error::config(format!("experiment kind '{kind}' requires '{name}'")))
    }

    fn forbid<T>(field: &Option<T>, name: &str, kind: &str) -> Result<()> {
        if field.is_some() {
            return Err(Error::config(format!(
                "experiment kind '{kind}' does not use '{name}'"
            )));
        }
        Ok(())
    }

    pub fn build(&self, seed: u64) -> Result<ExperimentPlan> {
        let kind_name = self.kind.as_str();
        let kind = match kind_name {
            "rabi_chevron" => {
                Self::forbid(&self.frequency, "frequency", kind_name)?;
                Self::forbid(&self.lengths, "lengths", kind_name)?;
                PlanKind::RabiChevron {
                    detuning: Self::require(&self.detuning, "detuning", kind_name)?.values()?,
                    tau: Self::require(&self.tau, "tau", kind_name)?.values()?,
                }
            }
            "t1" => {
                Self::forbid(&self.detuning, "detuning", kind_name)?;
                Self::forbid(&self.frequency, "frequency", kind_name)?;
                Self::forbid(&self.lengths, "lengths", kind_name)?;
                PlanKind::T1 { tau: Self::require(&self.tau, "tau", kind_name)?.values()? }
            }
            "ramsey" => {
                Self::forbid(&self.frequency, "frequency", kind_name)?;
                Self::forbid(&self.lengths, "lengths", kind_name)?;
                PlanKind::Ramsey {
                    tau: Self::require(&self.tau, "tau", kind_name)?.values()?,
                    detuning_ghz: Self::require(&self.detuning_ghz, "detuning_ghz", kind_name)?,
                }
            }
            "rb_reference" | "rb_interleaved" => {
                Self::forbid(&self.tau, "tau", kind_name)?;
                Self::forbid(&self.frequency, "frequency", kind_name)?;
                let noise = match self.rb_noise.as_deref().unwrap_or("depolarizing") {
                    "depolarizing" => RbNoise::Depolarizing {
                        p_clifford: Self::require(
                            &self.clifford_depolarizing,
                            "clifford_depolarizing",
                            kind_name,
                        )?,
                        p_gate: self.gate_depolarizing.unwrap_or(1.0),
                    },
                    "pulse" => RbNoise::PulseLevel,
                    other => {
                        return Err(Error::config(format!(
                            "unknown rb_noise '{other}' (expected depolarizing or pulse)"
                        )))
                    }
                };
                let interleaved_gate = if kind_name == "rb_interleaved" {
                    Some(parse_gate(&Self::require(
                        &self.interleaved_gate,
                        "interleaved_gate",
                        kind_name,
                    )?)?)
                } else {
                    Self::forbid(&self.interleaved_gate, "interleaved_gate", kind_name)?;
                    None
                };
                PlanKind::Rb(RbPlan {
                    lengths: Self::require(&self.lengths, "lengths", kind_name)?,
                    n_sequences: Self::require(&self.n_sequences, "n_sequences", kind_name)?,
                    noise,
                    interleaved_gate,
                })
            }
            "two_tone" => {
                Self::forbid(&self.tau, "tau", kind_name)?;
                Self::forbid(&self.lengths, "lengths", kind_name)?;
                PlanKind::TwoTone {
                    frequency: Self::require(&self.frequency, "frequency", kind_name)?.values()?,
                    drive_amplitude_rad_per_ns: Self::require(
                        &self.drive_amplitude_rad_per_ns,
                        "drive_amplitude_rad_per_ns",
                        kind_name,
                    )?,
                }
            }
            "vna_sweep" => {
                Self::forbid(&self.tau, "tau", kind_name)?;
                Self::forbid(&self.lengths, "lengths", kind_name)?;
                let conditioned = match self.conditioned.as_deref().unwrap_or("none") {
                    "none" => VnaConditioning::None,
                    "ground" => VnaConditioning::Ground,
                    "excited" => VnaConditioning::Excited,
                    "both" => VnaConditioning::Both,
                    other => {
                        return Err(Error::config(format!(
                            "unknown conditioning '{other}' (expected none, ground, excited, both)"
                        )))
                    }
                };
                PlanKind::VnaSweep {
                    frequency: Self::require(&self.frequency, "frequency", kind_name)?.values()?,
                    conditioned,
                    snr: self.snr,
                }
            }
            other => {
                return Err(Error::config(format!(
                    "unknown experiment kind '{other}' (expected rabi_chevron, t1, ramsey, \
                     rb_reference, rb_interleaved, two_tone, vna_sweep)"
                )))
            }
        };

        let mut gates = GateSet::default();
        if let Some(d) = self.gate_duration_ns {
            gates.gate_duration_ns = d;
        }
        if let Some(f) = self.sigma_fraction {
            gates.sigma_fraction = f;
        }
        if let Some(d) = self.readout_duration_ns {
            gates.readout_duration_ns = d;
        }
        if let Some(shape) = &self.gate_shape {
            gates.xy_shape = match shape.as_str() {
                "gaussian" => Shape::Gaussian,
                "rectangle" => Shape::Rectangle,
                other => {
                    return Err(Error::config(format!(
                        "unknown gate shape '{other}' (expected gaussian or rectangle)"
                    )))
                }
            };
        }
        let dim = match self.dimension.unwrap_or(2) {
            2 => StateDim::Two,
            3 => StateDim::Three,
            other => {
                return Err(Error::config(format!(
                    "dimension must be 2 or 3, got {other}"
                )))
            }
        };

        let plan = ExperimentPlan {
            kind,
            shots_per_point: self.shots_per_point.unwrap_or(10_000),
            global_seed: seed,
            dim,
            dt_ns: self.dt_ns,
            gates,
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 42

[device]
name = "si"

[device.transmon]
f_q_ghz = 4.962
anharmonicity_ghz = -0.260
t1_us = 27.0
t2_us = 6.6

[device.resonator]
f_r_ghz = 6.868
q_internal = 5.8e3
q_external = 12.9e3

[device.coupling]
chi_ghz = 0.0012

[device.squid]
l_j_per_junction_nh = 24.96

[device.fridge]
temperature_mk = 7.0

[device.readout]
mean_ground = [1.0, 0.0]
mean_excited = [-1.0, 0.0]
sigma = 0.2
eps0 = 0.05
eps1 = 0.05

[experiment]
kind = "t1"
shots_per_point = 500
tau = { start = 100.0, stop = 135000.0, points = 21, spacing = "log" }
"#;

    #[test]
    fn minimal_config_round_trips() {
        let config = RunConfig::parse(MINIMAL).unwrap();
        let device = config.device_spec().unwrap();
        assert_eq!(device.name, "si");
        assert!((device.transmon.e_j - 13.1).abs() < 0.15);
        let plan = config.plan(None, None).unwrap();
        assert_eq!(plan.global_seed, 42);
        assert_eq!(plan.shots_per_point, 500);
        assert_eq!(plan.kind.name(), "t1");
        // overrides win
        let plan = config.plan(Some(7), Some(100)).unwrap();
        assert_eq!(plan.global_seed, 7);
        assert_eq!(plan.shots_per_point, 100);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("seed = 42", "seed = 42\ntypo_key = 1");
        let err = RunConfig::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("typo_key"), "{err}");
        let bad = MINIMAL.replace("eps0 = 0.05", "eps0 = 0.05\nepsX = 0.05");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn missing_required_fields_are_named() {
        let bad = MINIMAL.replace("tau = { start = 100.0, stop = 135000.0, points = 21, spacing = \"log\" }", "");
        let config = RunConfig::parse(&bad).unwrap();
        let err = config.plan(None, None).unwrap_err();
        assert!(err.to_string().contains("tau"), "{err}");
    }

    #[test]
    fn fields_of_other_kinds_are_rejected() {
        let bad = MINIMAL.replace(
            "kind = \"t1\"",
            "kind = \"t1\"\nfrequency = { start = 1.0, stop = 2.0, points = 5 }",
        );
        let config = RunConfig::parse(&bad).unwrap();
        let err = config.plan(None, None).unwrap_err();
        assert!(err.to_string().contains("does not use"), "{err}");
    }

    #[test]
    fn rb_config_builds_depolarizing_plan() {
        let rb = MINIMAL.replace(
            "kind = \"t1\"\nshots_per_point = 500\ntau = { start = 100.0, stop = 135000.0, points = 21, spacing = \"log\" }",
            "kind = \"rb_interleaved\"\nshots_per_point = 500\nlengths = [1, 2, 4, 8]\nn_sequences = 4\nclifford_depolarizing = 0.9904\ngate_depolarizing = 0.99\ninterleaved_gate = \"x_pi\"",
        );
        let config = RunConfig::parse(&rb).unwrap();
        let plan = config.plan(None, None).unwrap();
        match plan.kind {
            PlanKind::Rb(ref rb) => {
                assert_eq!(rb.lengths, vec![1, 2, 4, 8]);
                assert_eq!(rb.interleaved_gate, Some(PhysicalGate::XPi));
                assert_eq!(
                    rb.noise,
                    RbNoise::Depolarizing { p_clifford: 0.9904, p_gate: 0.99 }
                );
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn infinite_lifetimes_parse() {
        let ideal = MINIMAL.replace("t1_us = 27.0", "t1_us = inf").replace("t2_us = 6.6", "t2_us = inf");
        let config = RunConfig::parse(&ideal).unwrap();
        let device = config.device_spec().unwrap();
        assert!(device.transmon.t1.is_infinite());
    }
}
