//! Experiment orchestration: the four time-domain protocols and the two
//! frequency-domain characterizations, run over a simulated device into
//! shot-averaged datasets.
//!
//! Sweep points are independent work items evaluated in parallel; every
//! random draw is keyed by (seed, domain, sequence_id, shot), so outputs
//! are bit-identical at any worker count.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{
    compose_sequence, random_clifford, recovery_gate, CliffordElement, PhysicalGate,
};
use crate::dataset::{toml_digest, Axis, DataSet, PointValue, RunMetadata};
use crate::device::DeviceSpec;
use crate::dynamics::{evolve_final, DensityState, NoiseChannels, SimOptions, StateDim};
use crate::error::{Error, Result};
use crate::pulse::GateSet;
use crate::readout::{sample_shot_from_probability, ShotRecord};
use crate::rng::{domain, StreamKey};

/// A uniformly spaced sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

impl Grid {
    pub fn linear(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points, spacing: Spacing::Linear }
    }

    pub fn log(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points, spacing: Spacing::Log }
    }

    /// Materialize the grid; strictly monotone by construction.
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 2 {
            return Err(Error::config(format!("grid needs at least 2 points, got {}", self.points)));
        }
        if self.stop <= self.start || self.stop.is_nan() || self.start.is_nan() {
            return Err(Error::config(format!(
                "grid must be strictly increasing, got [{}, {}]",
                self.start, self.stop
            )));
        }
        let mut values = match self.spacing {
            Spacing::Linear => (0..self.points)
                .map(|k| {
                    self.start
                        + (self.stop - self.start) * k as f64 / (self.points - 1) as f64
                })
                .collect::<Vec<f64>>(),
            Spacing::Log => {
                if self.start <= 0.0 {
                    return Err(Error::config(
                        "log-spaced grids need a positive start".to_string(),
                    ));
                }
                let (a, b) = (self.start.ln(), self.stop.ln());
                (0..self.points)
                    .map(|k| (a + (b - a) * k as f64 / (self.points - 1) as f64).exp())
                    .collect()
            }
        };
        // pin the endpoints exactly; interior round-off cannot reorder a
        // monotone grid
        values[0] = self.start;
        *values.last_mut().expect("at least two points") = self.stop;
        Ok(values)
    }
}

/// Benchmarking noise injection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RbNoise {
    /// Clifford-level depolarizing channel: each random Clifford contracts
    /// the Bloch vector by `p_clifford`, each interleaved gate by `p_gate`.
    Depolarizing { p_clifford: f64, p_gate: f64 },
    /// Full pulse-level simulation through the device T1/T2.
    PulseLevel,
}

/// Benchmarking sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RbPlan {
    pub lengths: Vec<u64>,
    pub n_sequences: u64,
    pub noise: RbNoise,
    /// Gate interleaved between the random Cliffords; `None` runs the
    /// reference curve only.
    pub interleaved_gate: Option<PhysicalGate>,
}

/// Qubit-state conditioning of a feedline sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VnaConditioning {
    /// Bare resonator (no qubit-state shift).
    #[default]
    None,
    Ground,
    Excited,
    Both,
}

/// What to sweep and how.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PlanKind {
    RabiChevron { detuning: Vec<f64>, tau: Vec<f64> },
    T1 { tau: Vec<f64> },
    Ramsey { tau: Vec<f64>, detuning_ghz: f64 },
    Rb(RbPlan),
    TwoTone { frequency: Vec<f64>, drive_amplitude_rad_per_ns: f64 },
    VnaSweep { frequency: Vec<f64>, conditioned: VnaConditioning, snr: Option<f64> },
}

impl PlanKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlanKind::RabiChevron { .. } => "rabi_chevron",
            PlanKind::T1 { .. } => "t1",
            PlanKind::Ramsey { .. } => "ramsey",
            PlanKind::Rb(p) if p.interleaved_gate.is_some() => "rb_interleaved",
            PlanKind::Rb(_) => "rb_reference",
            PlanKind::TwoTone { .. } => "two_tone",
            PlanKind::VnaSweep { .. } => "vna_sweep",
        }
    }
}

/// A fully resolved experiment plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    pub shots_per_point: u64,
    pub global_seed: u64,
    pub dim: StateDim,
    /// RK4 step override; `None` takes the per-dimension default.
    pub dt_ns: Option<f64>,
    pub gates: GateSet,
}

impl ExperimentPlan {
    pub fn new(kind: PlanKind, shots_per_point: u64, global_seed: u64) -> Self {
        Self {
            kind,
            shots_per_point,
            global_seed,
            dim: StateDim::Two,
            dt_ns: None,
            gates: GateSet::default(),
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        let mut opts = SimOptions::for_dim(self.dim);
        if let Some(dt) = self.dt_ns {
            opts.dt_ns = dt;
        }
        opts
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots_per_point < 1 {
            return Err(Error::config("shots_per_point must be at least 1".to_string()));
        }
        self.gates.validate()?;
        if let Some(dt) = self.dt_ns {
            if dt.is_nan() || dt <= 0.0 {
                return Err(Error::config(format!("dt = {dt} ns must be positive")));
            }
        }
        let check_monotone = |vals: &[f64], what: &str| -> Result<()> {
            if vals.len() < 2 {
                return Err(Error::config(format!("{what} grid needs at least 2 points")));
            }
            if vals.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config(format!("{what} grid must be strictly increasing")));
            }
            Ok(())
        };
        match &self.kind {
            PlanKind::RabiChevron { detuning, tau } => {
                check_monotone(detuning, "detuning")?;
                check_monotone(tau, "tau")?;
                if tau[0] < 0.0 {
                    return Err(Error::config("pulse durations must be non-negative".to_string()));
                }
            }
            PlanKind::T1 { tau } | PlanKind::Ramsey { tau, .. } => {
                check_monotone(tau, "tau")?;
                if tau[0] < 0.0 {
                    return Err(Error::config("delays must be non-negative".to_string()));
                }
            }
            PlanKind::Rb(rb) => {
                if rb.lengths.is_empty() || rb.n_sequences < 1 {
                    return Err(Error::config(
                        "benchmarking needs sequence lengths and n_sequences >= 1".to_string(),
                    ));
                }
                if rb.lengths.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::config(
                        "sequence lengths must be strictly increasing".to_string(),
                    ));
                }
                if let RbNoise::Depolarizing { p_clifford, p_gate } = rb.noise {
                    for p in [p_clifford, p_gate] {
                        if p.is_nan() || p <= 0.0 || p > 1.0 {
                            return Err(Error::config(format!(
                                "depolarizing parameters must lie in (0, 1], got {p}"
                            )));
                        }
                    }
                }
            }
            PlanKind::TwoTone { frequency, drive_amplitude_rad_per_ns } => {
                check_monotone(frequency, "frequency")?;
                if *drive_amplitude_rad_per_ns < 0.0 {
                    return Err(Error::config("drive amplitude must be non-negative".to_string()));
                }
            }
            PlanKind::VnaSweep { frequency, snr, .. } => {
                check_monotone(frequency, "frequency")?;
                if let Some(s) = snr {
                    if s.is_nan() || *s <= 0.0 {
                        return Err(Error::config(format!("SNR must be positive, got {s}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Datasets plus optional per-shot records, in point order.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub datasets: Vec<DataSet>,
    pub shots: Option<Vec<ShotRecord>>,
}

fn metadata(device: &DeviceSpec, plan: &ExperimentPlan) -> Result<RunMetadata> {
    Ok(RunMetadata {
        experiment: plan.kind.name().to_string(),
        device_name: device.name.clone(),
        seed: plan.global_seed,
        device_sha256: toml_digest(device)?,
        plan_sha256: toml_digest(plan)?,
    })
}

/// Measure one sweep point: evolve to the readout window, then draw the
/// keyed shots.
fn measure_state(
    p_excited: f64,
    device: &DeviceSpec,
    plan: &ExperimentPlan,
    sequence_id: u64,
    collect: bool,
) -> (PointValue, Vec<ShotRecord>) {
    let n = plan.shots_per_point;
    let mut hits = 0u64;
    let mut records = Vec::with_capacity(if collect { n as usize } else { 0 });
    for shot in 0..n {
        let key = StreamKey::new(plan.global_seed, domain::SHOT, sequence_id, shot);
        let rec = sample_shot_from_probability(p_excited, &device.readout, key);
        hits += rec.bit as u64;
        if collect {
            records.push(rec);
        }
    }
    let p = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    (PointValue::Population { p, se, shots: n }, records)
}

fn population_sweep<F>(
    device: &DeviceSpec,
    plan: &ExperimentPlan,
    n_points: usize,
    collect_shots: bool,
    point_probability: F,
) -> Result<(Vec<PointValue>, Option<Vec<ShotRecord>>)>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    let results: Result<Vec<(PointValue, Vec<ShotRecord>)>> = (0..n_points)
        .into_par_iter()
        .map(|idx| {
            let p = point_probability(idx)?;
            Ok(measure_state(p, device, plan, idx as u64, collect_shots))
        })
        .collect();
    let results = results?;
    let mut points = Vec::with_capacity(n_points);
    let mut shots = collect_shots.then(Vec::new);
    for (value, recs) in results {
        points.push(value);
        if let Some(sink) = shots.as_mut() {
            sink.extend(recs);
        }
    }
    Ok((points, shots))
}

fn initial_state(device: &DeviceSpec, dim: StateDim) -> DensityState {
    DensityState::thermal(dim, device.transmon.thermal_population)
}

/// Rabi chevron: 2D sweep over drive detuning and pulse duration.
pub fn run_rabi_chevron(device: &DeviceSpec, plan: &ExperimentPlan) -> Result<RunOutput> {
    plan.validate()?;
    device.validate()?;
    let PlanKind::RabiChevron { detuning, tau } = &plan.kind else {
        return Err(Error::usage("plan kind is not rabi_chevron".to_string()));
    };
    let opts = plan.sim_options();
    let n_tau = tau.len();
    let (points, shots) =
        population_sweep(device, plan, detuning.len() * n_tau, false, |idx| {
            let det = detuning[idx / n_tau];
            let t = tau[idx % n_tau];
            let seq = plan.gates.rabi(det, t)?;
            let state = evolve_final(&initial_state(device, opts.dim), &seq, device, &opts)?;
            Ok(state.excited_population() + state.leakage_population())
        })?;
    let dataset = DataSet {
        label: "rabi_chevron".to_string(),
        axes: vec![
            Axis { name: "detuning_ghz".to_string(), values: detuning.clone() },
            Axis { name: "tau_ns".to_string(), values: tau.clone() },
        ],
        points,
        metadata: metadata(device, plan)?,
    };
    dataset.validate()?;
    Ok(RunOutput { datasets: vec![dataset], shots })
}

/// Lifetime measurement: pi pulse, variable delay, readout.
pub fn run_t1(device: &DeviceSpec, plan: &ExperimentPlan, collect_shots: bool) -> Result<RunOutput> {
    plan.validate()?;
    device.validate()?;
    let PlanKind::T1 { tau } = &plan.kind else {
        return Err(Error::usage("plan kind is not t1".to_string()));
    };
    let opts = plan.sim_options();
    let (points, shots) = population_sweep(device, plan, tau.len(), collect_shots, |idx| {
        let seq = plan.gates.t1(tau[idx])?;
        let state = evolve_final(&initial_state(device, opts.dim), &seq, device, &opts)?;
        Ok(state.excited_population() + state.leakage_population())
    })?;
    let dataset = DataSet {
        label: "t1".to_string(),
        axes: vec![Axis { name: "tau_ns".to_string(), values: tau.clone() }],
        points,
        metadata: metadata(device, plan)?,
    };
    dataset.validate()?;
    Ok(RunOutput { datasets: vec![dataset], shots })
}

/// Ramsey fringes: two detuned pi/2 pulses with a variable gap.
pub fn run_ramsey(
    device: &DeviceSpec,
    plan: &ExperimentPlan,
    collect_shots: bool,
) -> Result<RunOutput> {
    plan.validate()?;
    device.validate()?;
    let PlanKind::Ramsey { tau, detuning_ghz } = &plan.kind else {
        return Err(Error::usage("plan kind is not ramsey".to_string()));
    };
    let opts = plan.sim_options();
    let (points, shots) = population_sweep(device, plan, tau.len(), collect_shots, |idx| {
        let seq = plan.gates.ramsey(tau[idx], *detuning_ghz)?;
        let state = evolve_final(&initial_state(device, opts.dim), &seq, device, &opts)?;
        Ok(state.excited_population() + state.leakage_population())
    })?;
    let dataset = DataSet {
        label: "ramsey".to_string(),
        axes: vec![Axis { name: "tau_ns".to_string(), values: tau.clone() }],
        points,
        metadata: metadata(device, plan)?,
    };
    dataset.validate()?;
    Ok(RunOutput { datasets: vec![dataset], shots })
}

/// Stable point identifier shared by the reference and interleaved curves
/// so their random draws pair up.
fn rb_sequence_id(length_idx: usize, seq_idx: u64) -> u64 {
    length_idx as u64 * 1_000_000 + seq_idx
}

fn draw_rb_sequence(seed: u64, sequence_id: u64, n: u64) -> Vec<CliffordElement> {
    let mut rng = StreamKey::new(seed, domain::CLIFFORD, sequence_id, 0).rng();
    (0..n).map(|_| random_clifford(&mut rng)).collect()
}

/// Compile a Clifford sequence (with optional interleaving) plus its
/// recovery gate into physical gates.
fn compile_rb_gates(
    cliffords: &[CliffordElement],
    interleaved: Option<PhysicalGate>,
) -> Vec<PhysicalGate> {
    let mut full: Vec<CliffordElement> = Vec::with_capacity(2 * cliffords.len() + 1);
    for c in cliffords {
        full.push(*c);
        if let Some(g) = interleaved {
            full.push(CliffordElement::from(g));
        }
    }
    let recovery = recovery_gate(&full);
    debug_assert!(compose_sequence(&full).then(recovery).maps_ground_to_excited());
    let mut gates = Vec::new();
    for c in &full {
        gates.extend_from_slice(c.decompose());
    }
    gates.extend_from_slice(recovery.decompose());
    gates
}

/// Excited-state probability of one benchmarking sequence at the readout
/// window under the chosen noise model.
fn rb_sequence_probability(
    device: &DeviceSpec,
    plan: &ExperimentPlan,
    rb: &RbPlan,
    cliffords: &[CliffordElement],
    interleaved: Option<PhysicalGate>,
) -> Result<f64> {
    match rb.noise {
        RbNoise::Depolarizing { p_clifford, p_gate } => {
            // exact: rotations are exact and each channel application
            // contracts the Bloch vector uniformly, so after recovery the
            // vector is -z with length (p_c [p_g])^N
            let n = cliffords.len() as i32;
            let contraction = if interleaved.is_some() {
                (p_clifford * p_gate).powi(n)
            } else {
                p_clifford.powi(n)
            };
            Ok(0.5 * (1.0 + contraction))
        }
        RbNoise::PulseLevel => {
            let gates = compile_rb_gates(cliffords, interleaved);
            let seq = plan.gates.rb(&gates)?;
            let opts = plan.sim_options();
            let state = evolve_final(&initial_state(device, opts.dim), &seq, device, &opts)?;
            Ok(state.excited_population() + state.leakage_population())
        }
    }
}

/// Run the benchmarking protocol. Returns the reference curve and, when an
/// interleaved gate is configured, the paired interleaved curve drawn from
/// the same per-(length, sequence) random streams.
pub fn run_rb(device: &DeviceSpec, plan: &ExperimentPlan) -> Result<RunOutput> {
    plan.validate()?;
    device.validate()?;
    let PlanKind::Rb(rb) = &plan.kind else {
        return Err(Error::usage("plan kind is not a benchmarking run".to_string()));
    };
    let meta = metadata(device, plan)?;
    let curves: Vec<Option<PhysicalGate>> = match rb.interleaved_gate {
        Some(g) => vec![None, Some(g)],
        None => vec![None],
    };
    let mut datasets = Vec::new();
    for interleaved in curves {
        let points: Result<Vec<PointValue>> = rb
            .lengths
            .par_iter()
            .enumerate()
            .map(|(length_idx, n)| {
                let mut hits = 0u64;
                let mut total = 0u64;
                for seq_idx in 0..rb.n_sequences {
                    let sequence_id = rb_sequence_id(length_idx, seq_idx);
                    let cliffords = draw_rb_sequence(plan.global_seed, sequence_id, *n);
                    let p_e =
                        rb_sequence_probability(device, plan, rb, &cliffords, interleaved)?;
                    for shot in 0..plan.shots_per_point {
                        let key = StreamKey::new(
                            plan.global_seed,
                            domain::SHOT,
                            sequence_id,
                            shot,
                        );
                        let rec = sample_shot_from_probability(p_e, &device.readout, key);
                        hits += rec.bit as u64;
                        total += 1;
                    }
                }
                let p = hits as f64 / total as f64;
                let se = (p * (1.0 - p) / total as f64).sqrt();
                Ok(PointValue::Population { p, se, shots: total })
            })
            .collect();
        let mut meta_curve = meta.clone();
        let label = if interleaved.is_some() { "rb_interleaved" } else { "rb_reference" };
        meta_curve.experiment = label.to_string();
        let dataset = DataSet {
            label: label.to_string(),
            axes: vec![Axis {
                name: "sequence_length".to_string(),
                values: rb.lengths.iter().map(|n| *n as f64).collect(),
            }],
            points: points?,
            metadata: meta_curve,
        };
        dataset.validate()?;
        datasets.push(dataset);
    }
    Ok(RunOutput { datasets, shots: None })
}

/// The compiled gate list of the first drawn sequence (shortest length,
/// sequence 0), for waveform and trajectory inspection.
pub fn first_rb_gates(plan: &ExperimentPlan) -> Result<Vec<PhysicalGate>> {
    let PlanKind::Rb(rb) = &plan.kind else {
        return Err(Error::usage("plan kind is not a benchmarking run".to_string()));
    };
    let cliffords = draw_rb_sequence(plan.global_seed, rb_sequence_id(0, 0), rb.lengths[0]);
    Ok(compile_rb_gates(&cliffords, rb.interleaved_gate))
}

/// Audit export of the benchmarking randomness: canonical Clifford indices
/// and the compiled physical gates for every (length, sequence) pair.
pub fn rb_sequence_audit(plan: &ExperimentPlan) -> Result<String> {
    let PlanKind::Rb(rb) = &plan.kind else {
        return Err(Error::usage("plan kind is not a benchmarking run".to_string()));
    };
    let mut out = String::from("# length,sequence,clifford_indices,physical_gates\n");
    for (length_idx, n) in rb.lengths.iter().enumerate() {
        for seq_idx in 0..rb.n_sequences {
            let sequence_id = rb_sequence_id(length_idx, seq_idx);
            let cliffords = draw_rb_sequence(plan.global_seed, sequence_id, *n);
            let indices: Vec<String> =
                cliffords.iter().map(|c| c.index().to_string()).collect();
            let gates = compile_rb_gates(&cliffords, rb.interleaved_gate);
            let gate_names: Vec<&str> = gates.iter().map(|g| g.label()).collect();
            out.push_str(&format!(
                "{},{},{},{}\n",
                n,
                seq_idx,
                indices.join(" "),
                gate_names.join(" ")
            ));
        }
    }
    Ok(out)
}

/// Steady-state excited population of a driven, damped two-level system:
/// rho_ee = S / (Gamma_1 + 2 S) with S = (Omega^2 Gamma_2 / 2) /
/// (Gamma_2^2 + delta^2).
pub fn saturated_population(
    omega_rad_per_ns: f64,
    delta_rad_per_ns: f64,
    gamma1_per_ns: f64,
    gamma2_per_ns: f64,
) -> f64 {
    if omega_rad_per_ns == 0.0 {
        return 0.0;
    }
    let s = 0.5 * omega_rad_per_ns * omega_rad_per_ns * gamma2_per_ns
        / (gamma2_per_ns * gamma2_per_ns + delta_rad_per_ns * delta_rad_per_ns);
    s / (gamma1_per_ns + 2.0 * s)
}

/// Two-tone spectroscopy response model: saturation of the qubit line at
/// f_q, plus (for three levels) the two-photon line at f_q + eta/2 treated
/// as a direct transition with the adiabatically eliminated Rabi rate
/// sqrt(2) Omega^2 / |eta|.
pub fn two_tone_populations(
    device: &DeviceSpec,
    dim: StateDim,
    drive_frequency_ghz: f64,
    omega_rad_per_ns: f64,
) -> Result<(f64, f64)> {
    let noise = NoiseChannels::from_lifetimes(device.transmon.t1, device.transmon.t2)?;
    if noise.gamma1_per_ns == 0.0 {
        return Err(Error::config(
            "steady-state spectroscopy needs a finite T1".to_string(),
        ));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let gamma2 = 0.5 * noise.gamma1_per_ns + noise.gamma_phi_per_ns;
    let delta = two_pi * (drive_frequency_ghz - device.transmon.f_q);
    let p_e = saturated_population(omega_rad_per_ns, delta, noise.gamma1_per_ns, gamma2);
    let p_leak = match dim {
        StateDim::Two => 0.0,
        StateDim::Three => {
            let eta_ang = two_pi * device.transmon.eta_f;
            let omega_two_photon =
                std::f64::consts::SQRT_2 * omega_rad_per_ns * omega_rad_per_ns / eta_ang.abs();
            // the 0<->2 manifold: two drive photons per cycle, cascade decay
            let delta_two_photon = 2.0
                * two_pi
                * (drive_frequency_ghz - (device.transmon.f_q + device.transmon.eta_f / 2.0));
            let gamma1_eff = 2.0 * noise.gamma1_per_ns;
            let gamma2_eff = noise.gamma1_per_ns + 4.0 * noise.gamma_phi_per_ns;
            saturated_population(omega_two_photon, delta_two_photon, gamma1_eff, gamma2_eff)
        }
    };
    Ok((p_e, p_leak))
}

/// CW two-tone spectroscopy: sweep the XY drive and report the change of
/// the feedline response at the ground-state dip.
pub fn run_two_tone(device: &DeviceSpec, plan: &ExperimentPlan) -> Result<RunOutput> {
    plan.validate()?;
    device.validate()?;
    let PlanKind::TwoTone { frequency, drive_amplitude_rad_per_ns } = &plan.kind else {
        return Err(Error::usage("plan kind is not two_tone".to_string()));
    };
    let r = &device.resonator;
    let chi = device.coupling.chi;
    let probe = r.f_r + chi;
    let s21_ground = crate::readout::s21_hanger_conditioned(
        probe,
        r.f_r,
        r.q_internal,
        r.q_external,
        chi,
        false,
    )?;
    let s21_excited = crate::readout::s21_hanger_conditioned(
        probe,
        r.f_r,
        r.q_internal,
        r.q_external,
        chi,
        true,
    )?;
    let points: Result<Vec<PointValue>> = frequency
        .par_iter()
        .map(|f_d| {
            let (p_e, p_leak) =
                two_tone_populations(device, plan.dim, *f_d, *drive_amplitude_rad_per_ns)?;
            let p_tot = (p_e + p_leak).min(1.0);
            let response = (1.0 - p_tot) * s21_ground + p_tot * s21_excited;
            Ok(PointValue::Scalar { value: response.norm() - s21_ground.norm() })
        })
        .collect();
    let dataset = DataSet {
        label: "two_tone".to_string(),
        axes: vec![Axis { name: "drive_frequency_ghz".to_string(), values: frequency.clone() }],
        points: points?,
        metadata: metadata(device, plan)?,
    };
    dataset.validate()?;
    Ok(RunOutput { datasets: vec![dataset], shots: None })
}

/// Feedline transmission sweep, optionally conditioned on the qubit state,
/// optionally with additive complex noise at the stated SNR.
pub fn run_vna_sweep(device: &DeviceSpec, plan: &ExperimentPlan) -> Result<RunOutput> {
    plan.validate()?;
    device.validate()?;
    let PlanKind::VnaSweep { frequency, conditioned, snr } = &plan.kind else {
        return Err(Error::usage("plan kind is not vna_sweep".to_string()));
    };
    let r = &device.resonator;
    let chi = device.coupling.chi;
    let conditions: Vec<(&str, Option<bool>)> = match conditioned {
        VnaConditioning::None => vec![("vna", None)],
        VnaConditioning::Ground => vec![("vna_ground", Some(false))],
        VnaConditioning::Excited => vec![("vna_excited", Some(true))],
        VnaConditioning::Both => {
            vec![("vna_ground", Some(false)), ("vna_excited", Some(true))]
        }
    };
    let meta = metadata(device, plan)?;
    let mut datasets = Vec::new();
    for (cond_idx, (label, excited)) in conditions.iter().enumerate() {
        let points: Result<Vec<PointValue>> = frequency
            .par_iter()
            .enumerate()
            .map(|(idx, f)| {
                let s = match excited {
                    None => crate::readout::s21_hanger(*f, r.f_r, r.q_internal, r.q_external)?,
                    Some(e) => crate::readout::s21_hanger_conditioned(
                        *f,
                        r.f_r,
                        r.q_internal,
                        r.q_external,
                        chi,
                        *e,
                    )?,
                };
                let noisy = match snr {
                    None => s,
                    Some(snr) => {
                        let mut rng = StreamKey::new(
                            plan.global_seed,
                            domain::SWEEP_NOISE,
                            cond_idx as u64,
                            idx as u64,
                        )
                        .rng();
                        let ni: f64 = StandardNormal.sample(&mut rng);
                        let nq: f64 = StandardNormal.sample(&mut rng);
                        s + num_complex::Complex64::new(ni / snr, nq / snr)
                    }
                };
                Ok(PointValue::Complex { re: noisy.re, im: noisy.im })
            })
            .collect();
        let mut meta_curve = meta.clone();
        meta_curve.experiment = label.to_string();
        let dataset = DataSet {
            label: label.to_string(),
            axes: vec![Axis { name: "frequency_ghz".to_string(), values: frequency.clone() }],
            points: points?,
            metadata: meta_curve,
        };
        dataset.validate()?;
        datasets.push(dataset);
    }
    Ok(RunOutput { datasets, shots: None })
}

/// Dispatch on the plan kind.
pub fn run_experiment(
    device: &DeviceSpec,
    plan: &ExperimentPlan,
    collect_shots: bool,
) -> Result<RunOutput> {
    match &plan.kind {
        PlanKind::RabiChevron { .. } => run_rabi_chevron(device, plan),
        PlanKind::T1 { .. } => run_t1(device, plan, collect_shots),
        PlanKind::Ramsey { .. } => run_ramsey(device, plan, collect_shots),
        PlanKind::Rb(_) => run_rb(device, plan),
        PlanKind::TwoTone { .. } => run_two_tone(device, plan),
        PlanKind::VnaSweep { .. } => run_vna_sweep(device, plan),
    }
}

/// Default sweeps mirroring the published figures: log-spaced delays to
/// ~5 T1, linear Ramsey window to ~3 T2, powers of two for benchmarking.
pub mod defaults {
    use super::*;

    pub fn t1_plan(device: &DeviceSpec, seed: u64) -> Result<ExperimentPlan> {
        let t1_ns = 1e3 * device.transmon.t1;
        let grid = Grid::log(t1_ns * 0.01, t1_ns * 5.0, 21).values()?;
        Ok(ExperimentPlan::new(PlanKind::T1 { tau: grid }, 10_000, seed))
    }

    pub fn ramsey_plan(device: &DeviceSpec, seed: u64) -> Result<ExperimentPlan> {
        let t2_ns = 1e3 * device.transmon.t2;
        let span = 3.0 * t2_ns;
        // about five fringes across the window
        let detuning_ghz = 5.0 / span;
        let grid = Grid::linear(0.0, span, 61).values()?;
        Ok(ExperimentPlan::new(
            PlanKind::Ramsey { tau: grid, detuning_ghz },
            10_000,
            seed,
        ))
    }

    pub fn rb_plan(
        p_clifford: f64,
        p_gate: f64,
        n_sequences: u64,
        interleaved_gate: Option<PhysicalGate>,
        seed: u64,
    ) -> ExperimentPlan {
        // measurement budget 20000 per curve: 500 shots x 40 sequences
        let shots = 20_000 / n_sequences.max(1);
        ExperimentPlan::new(
            PlanKind::Rb(RbPlan {
                lengths: vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512],
                n_sequences,
                noise: RbNoise::Depolarizing { p_clifford, p_gate },
                interleaved_gate,
            }),
            shots,
            seed,
        )
    }
}
