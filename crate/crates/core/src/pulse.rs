//! Pulse envelopes, timed schedules, and the experiment sequence builders.
//!
//! Envelope amplitudes are peak Rabi rates in rad/ns; times are ns. Gate
//! calibration follows the area theorem: the integral of the envelope over
//! its duration is the rotation angle.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::clifford::PhysicalGate;
use crate::error::{Error, Result};

/// Analytic envelope shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Truncated gaussian, shifted so the value at both endpoints is zero.
    Gaussian,
    Rectangle,
}

/// A shaped pulse envelope on [0, duration].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub shape: Shape,
    pub duration_ns: f64,
    /// Peak Rabi rate, rad/ns (volt-arbitrary for readout pulses).
    pub peak_amplitude: f64,
    /// Gaussian width, ns; ignored for rectangles.
    pub sigma_ns: f64,
}

impl Envelope {
    pub fn gaussian(duration_ns: f64, sigma_ns: f64, peak_amplitude: f64) -> Result<Self> {
        if duration_ns <= 0.0 || sigma_ns <= 0.0 {
            return Err(Error::domain(format!(
                "gaussian envelope needs positive duration and sigma, got {duration_ns}, {sigma_ns} ns"
            )));
        }
        Ok(Self { shape: Shape::Gaussian, duration_ns, peak_amplitude, sigma_ns })
    }

    pub fn rectangle(duration_ns: f64, peak_amplitude: f64) -> Result<Self> {
        if duration_ns <= 0.0 {
            return Err(Error::domain(format!(
                "rectangle envelope needs positive duration, got {duration_ns} ns"
            )));
        }
        Ok(Self { shape: Shape::Rectangle, duration_ns, peak_amplitude, sigma_ns: 0.0 })
    }

    /// Instantaneous Rabi rate at time `t_ns` measured from the pulse start.
    pub fn value(&self, t_ns: f64) -> f64 {
        if t_ns < 0.0 || t_ns > self.duration_ns {
            return 0.0;
        }
        match self.shape {
            Shape::Rectangle => self.peak_amplitude,
            Shape::Gaussian => {
                let c = self.duration_ns / 2.0;
                let edge = (-c * c / (2.0 * self.sigma_ns * self.sigma_ns)).exp();
                let raw = (-(t_ns - c) * (t_ns - c) / (2.0 * self.sigma_ns * self.sigma_ns)).exp();
                self.peak_amplitude * (raw - edge) / (1.0 - edge)
            }
        }
    }

    /// Closed-form rotation angle, rad: the time integral of the envelope.
    pub fn area(&self) -> f64 {
        self.peak_amplitude * unit_area(self.shape, self.duration_ns, self.sigma_ns)
    }
}

/// Area of the unit-peak envelope; closed form for both shapes.
fn unit_area(shape: Shape, duration_ns: f64, sigma_ns: f64) -> f64 {
    match shape {
        Shape::Rectangle => duration_ns,
        Shape::Gaussian => {
            let c = duration_ns / 2.0;
            let edge = (-c * c / (2.0 * sigma_ns * sigma_ns)).exp();
            let gauss_part = sigma_ns
                * (2.0 * std::f64::consts::PI).sqrt()
                * erf(c / (std::f64::consts::SQRT_2 * sigma_ns));
            (gauss_part - duration_ns * edge) / (1.0 - edge)
        }
    }
}

/// Peak amplitude (rad/ns) that makes the envelope a pi rotation. A pi/2
/// pulse uses half this amplitude at the same duration.
pub fn calibrate_pi_amplitude(shape: Shape, duration_ns: f64, sigma_ns: f64) -> Result<f64> {
    if duration_ns <= 0.0 {
        return Err(Error::domain(format!("duration must be positive, got {duration_ns} ns")));
    }
    if shape == Shape::Gaussian && sigma_ns <= 0.0 {
        return Err(Error::domain(format!("gaussian sigma must be positive, got {sigma_ns} ns")));
    }
    Ok(std::f64::consts::PI / unit_area(shape, duration_ns, sigma_ns))
}

/// Output channel of a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Xy,
    Readout,
}

/// One timed pulse in the rotating frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub envelope: Envelope,
    pub start_ns: f64,
    pub channel: Channel,
    /// Drive frequency minus qubit frequency, GHz; XY pulses only.
    pub drive_detuning_ghz: f64,
    /// Drive phase, rad: 0 drives about X, pi/2 about Y.
    pub phase_rad: f64,
}

impl Pulse {
    pub fn end_ns(&self) -> f64 {
        self.start_ns + self.envelope.duration_ns
    }
}

/// An ordered schedule of XY pulses followed by exactly one readout pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pulses: Vec<Pulse>,
    total_duration_ns: f64,
}

/// Tolerance for back-to-back pulse scheduling comparisons.
const SCHEDULE_EPS_NS: f64 = 1e-9;

impl PulseSequence {
    /// Build and validate a schedule: exactly one readout pulse, last in
    /// time, and no overlapping pulses on a channel (touching is allowed).
    pub fn new(mut pulses: Vec<Pulse>) -> Result<Self> {
        pulses.sort_by(|a, b| a.start_ns.total_cmp(&b.start_ns));
        let readouts: Vec<&Pulse> =
            pulses.iter().filter(|p| p.channel == Channel::Readout).collect();
        if readouts.len() != 1 {
            return Err(Error::config(format!(
                "a sequence needs exactly one readout pulse, got {}",
                readouts.len()
            )));
        }
        let ro_start = readouts[0].start_ns;
        for p in pulses.iter().filter(|p| p.channel == Channel::Xy) {
            if p.start_ns < 0.0 {
                return Err(Error::config("pulse start times must be non-negative".to_string()));
            }
            if p.end_ns() > ro_start + SCHEDULE_EPS_NS {
                return Err(Error::config(format!(
                    "XY pulse ending at {} ns runs past the readout start at {} ns",
                    p.end_ns(),
                    ro_start
                )));
            }
        }
        for ch in [Channel::Xy, Channel::Readout] {
            let on_channel: Vec<&Pulse> = pulses.iter().filter(|p| p.channel == ch).collect();
            for pair in on_channel.windows(2) {
                if pair[1].start_ns < pair[0].end_ns() - SCHEDULE_EPS_NS {
                    return Err(Error::config(format!(
                        "overlapping pulses on {:?}: [{}, {}] and [{}, {}] ns",
                        ch,
                        pair[0].start_ns,
                        pair[0].end_ns(),
                        pair[1].start_ns,
                        pair[1].end_ns()
                    )));
                }
            }
        }
        let total_duration_ns =
            pulses.iter().map(|p| p.end_ns()).fold(0.0f64, f64::max);
        Ok(Self { pulses, total_duration_ns })
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn xy_pulses(&self) -> impl Iterator<Item = &Pulse> {
        self.pulses.iter().filter(|p| p.channel == Channel::Xy)
    }

    pub fn readout(&self) -> &Pulse {
        self.pulses
            .iter()
            .find(|p| p.channel == Channel::Readout)
            .expect("validated sequence always has a readout pulse")
    }

    pub fn readout_start_ns(&self) -> f64 {
        self.readout().start_ns
    }

    pub fn total_duration_ns(&self) -> f64 {
        self.total_duration_ns
    }
}

/// Calibrated gate conventions shared by all sequence builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSet {
    pub xy_shape: Shape,
    pub gate_duration_ns: f64,
    /// sigma = sigma_fraction * duration for gaussian gates.
    pub sigma_fraction: f64,
    pub readout_duration_ns: f64,
}

impl Default for GateSet {
    fn default() -> Self {
        Self {
            xy_shape: Shape::Gaussian,
            gate_duration_ns: 30.0,
            sigma_fraction: 0.25,
            readout_duration_ns: 500.0,
        }
    }
}

impl GateSet {
    pub fn validate(&self) -> Result<()> {
        if self.gate_duration_ns <= 0.0 || self.readout_duration_ns <= 0.0 {
            return Err(Error::config("gate and readout durations must be positive".to_string()));
        }
        if self.xy_shape == Shape::Gaussian && self.sigma_fraction <= 0.0 {
            return Err(Error::config("sigma fraction must be positive".to_string()));
        }
        Ok(())
    }

    fn sigma_ns(&self) -> f64 {
        self.gate_duration_ns * self.sigma_fraction
    }

    /// Peak amplitude of the calibrated pi gate, rad/ns.
    pub fn pi_amplitude(&self) -> Result<f64> {
        calibrate_pi_amplitude(self.xy_shape, self.gate_duration_ns, self.sigma_ns())
    }

    fn gate_envelope(&self, amplitude_scale: f64) -> Result<Envelope> {
        let amp = self.pi_amplitude()? * amplitude_scale;
        match self.xy_shape {
            Shape::Gaussian => Envelope::gaussian(self.gate_duration_ns, self.sigma_ns(), amp),
            Shape::Rectangle => Envelope::rectangle(self.gate_duration_ns, amp),
        }
    }

    fn readout_pulse(&self, start_ns: f64) -> Result<Pulse> {
        Ok(Pulse {
            envelope: Envelope::rectangle(self.readout_duration_ns, 1.0)?,
            start_ns,
            channel: Channel::Readout,
            drive_detuning_ghz: 0.0,
            phase_rad: 0.0,
        })
    }

    /// Rabi sequence: one rectangle XY pulse of duration `tau_ns` at the
    /// given detuning, amplitude pi-calibrated for the nominal gate
    /// duration, then readout. `tau_ns = 0` gives a readout-only sequence.
    pub fn rabi(&self, drive_detuning_ghz: f64, tau_ns: f64) -> Result<PulseSequence> {
        if tau_ns < 0.0 {
            return Err(Error::config(format!("negative pulse duration {tau_ns} ns")));
        }
        let rabi_rate = std::f64::consts::PI / self.gate_duration_ns;
        let mut pulses = Vec::new();
        if tau_ns > 0.0 {
            pulses.push(Pulse {
                envelope: Envelope::rectangle(tau_ns, rabi_rate)?,
                start_ns: 0.0,
                channel: Channel::Xy,
                drive_detuning_ghz,
                phase_rad: 0.0,
            });
        }
        pulses.push(self.readout_pulse(tau_ns)?);
        PulseSequence::new(pulses)
    }

    /// Lifetime sequence: calibrated X_pi pulse, idle `tau_ns`, readout.
    pub fn t1(&self, tau_ns: f64) -> Result<PulseSequence> {
        if tau_ns < 0.0 {
            return Err(Error::config(format!("negative delay {tau_ns} ns")));
        }
        let pi_pulse = Pulse {
            envelope: self.gate_envelope(1.0)?,
            start_ns: 0.0,
            channel: Channel::Xy,
            drive_detuning_ghz: 0.0,
            phase_rad: 0.0,
        };
        let ro = self.readout_pulse(self.gate_duration_ns + tau_ns)?;
        PulseSequence::new(vec![pi_pulse, ro])
    }

    /// Ramsey sequence: X_pi/2, idle `tau_ns`, X_pi/2, readout, with both
    /// pulses at the stated drive detuning.
    pub fn ramsey(&self, tau_ns: f64, drive_detuning_ghz: f64) -> Result<PulseSequence> {
        if tau_ns < 0.0 {
            return Err(Error::config(format!("negative delay {tau_ns} ns")));
        }
        let half = self.gate_envelope(0.5)?;
        let first = Pulse {
            envelope: half,
            start_ns: 0.0,
            channel: Channel::Xy,
            drive_detuning_ghz,
            phase_rad: 0.0,
        };
        let second = Pulse {
            envelope: half,
            start_ns: self.gate_duration_ns + tau_ns,
            channel: Channel::Xy,
            drive_detuning_ghz,
            phase_rad: 0.0,
        };
        let ro = self.readout_pulse(2.0 * self.gate_duration_ns + tau_ns)?;
        PulseSequence::new(vec![first, second, ro])
    }

    /// Benchmarking sequence: back-to-back calibrated pulses realizing the
    /// physical gate list (identity gates are explicit idle slots), then
    /// readout.
    pub fn rb(&self, gates: &[PhysicalGate]) -> Result<PulseSequence> {
        let mut pulses = Vec::new();
        let mut t = 0.0;
        for gate in gates {
            if let Some((scale, phase_rad)) = gate_drive(*gate) {
                pulses.push(Pulse {
                    envelope: self.gate_envelope(scale)?,
                    start_ns: t,
                    channel: Channel::Xy,
                    drive_detuning_ghz: 0.0,
                    phase_rad,
                });
            }
            t += self.gate_duration_ns;
        }
        pulses.push(self.readout_pulse(t)?);
        PulseSequence::new(pulses)
    }
}

/// Amplitude scale and drive phase realizing each physical gate; identity
/// is a timed idle with no pulse.
fn gate_drive(gate: PhysicalGate) -> Option<(f64, f64)> {
    use std::f64::consts::{FRAC_PI_2, PI};
    match gate {
        PhysicalGate::I => None,
        PhysicalGate::XPi => Some((1.0, 0.0)),
        PhysicalGate::XHalf => Some((0.5, 0.0)),
        PhysicalGate::XHalfNeg => Some((0.5, PI)),
        PhysicalGate::YPi => Some((1.0, FRAC_PI_2)),
        PhysicalGate::YHalf => Some((0.5, FRAC_PI_2)),
        PhysicalGate::YHalfNeg => Some((0.5, FRAC_PI_2 + PI)),
    }
}
