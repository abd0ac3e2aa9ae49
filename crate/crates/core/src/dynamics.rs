//! Density-operator evolution of the driven qubit with amplitude damping
//! and pure dephasing.
//!
//! Pulses are integrated with fixed-step classical RK4 in the frame
//! rotating at each pulse's drive frequency; idle gaps use the exact
//! analytic decoherence map in the qubit frame, so long delays cost O(1).
//! The frame change at pulse boundaries is the diagonal phase conjugation
//! rho_jk -> rho_jk exp(i delta t (j - k)) with delta the angular drive
//! detuning and t the absolute pulse edge time.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::pulse::{Envelope, PulseSequence};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Hilbert space truncation: the computational qubit, or qubit plus one
/// leakage level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateDim {
    Two,
    Three,
}

impl StateDim {
    pub fn size(&self) -> usize {
        match self {
            StateDim::Two => 2,
            StateDim::Three => 3,
        }
    }
}

type M3 = [[C64; 3]; 3];

const M3_ZERO: M3 = [[C64::new(0.0, 0.0); 3]; 3];

/// A d x d qubit density operator (d = 2 or 3).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    dim: StateDim,
    m: M3,
}

impl DensityState {
    pub fn pure(dim: StateDim, level: usize) -> Self {
        assert!(level < dim.size(), "level {level} outside dimension {}", dim.size());
        let mut m = M3_ZERO;
        m[level][level] = C64::new(1.0, 0.0);
        Self { dim, m }
    }

    pub fn ground(dim: StateDim) -> Self {
        Self::pure(dim, 0)
    }

    pub fn excited(dim: StateDim) -> Self {
        Self::pure(dim, 1)
    }

    /// Thermal initial state diag(1 - p, p[, 0]).
    pub fn thermal(dim: StateDim, excited_population: f64) -> Self {
        let mut m = M3_ZERO;
        m[0][0] = C64::new(1.0 - excited_population, 0.0);
        m[1][1] = C64::new(excited_population, 0.0);
        Self { dim, m }
    }

    /// Classical mixture diag(p0, p1[, p2]); probabilities must sum to 1.
    pub fn mixed(dim: StateDim, populations: &[f64]) -> Result<Self> {
        if populations.len() != dim.size() {
            return Err(Error::usage(format!(
                "expected {} populations, got {}",
                dim.size(),
                populations.len()
            )));
        }
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > 1e-9 || populations.iter().any(|p| *p < -1e-12) {
            return Err(Error::domain(format!(
                "populations {populations:?} are not a distribution"
            )));
        }
        let mut m = M3_ZERO;
        for (k, p) in populations.iter().enumerate() {
            m[k][k] = C64::new(*p, 0.0);
        }
        Ok(Self { dim, m })
    }

    pub fn dim(&self) -> StateDim {
        self.dim
    }

    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.m[row][col]
    }

    pub fn population(&self, level: usize) -> f64 {
        self.m[level][level].re
    }

    /// Computational excited-state population rho_11; leakage is reported
    /// separately by [`DensityState::leakage_population`].
    pub fn excited_population(&self) -> f64 {
        self.m[1][1].re
    }

    /// Population outside the computational basis (0 for two levels).
    pub fn leakage_population(&self) -> f64 {
        match self.dim {
            StateDim::Two => 0.0,
            StateDim::Three => self.m[2][2].re,
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim.size()).map(|k| self.m[k][k].re).sum()
    }

    pub fn purity(&self) -> f64 {
        let d = self.dim.size();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += (self.m[i][j] * self.m[j][i]).re;
            }
        }
        acc
    }

    /// Largest deviation from Hermitian symmetry.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim.size();
        let mut worst = 0.0f64;
        for i in 0..d {
            worst = worst.max(self.m[i][i].im.abs());
            for j in (i + 1)..d {
                worst = worst.max((self.m[i][j] - self.m[j][i].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order. Closed form: quadratic for two
    /// levels, the trigonometric solution of the characteristic cubic for
    /// three (the input is symmetrized first, so integrator round-off in
    /// the Hermitian part does not leak imaginary parts in).
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            StateDim::Two => {
                let a = self.m[0][0].re;
                let b = self.m[1][1].re;
                let c = 0.5 * (self.m[0][1] + self.m[1][0].conj());
                let mid = 0.5 * (a + b);
                let r = (0.25 * (a - b) * (a - b) + c.norm_sqr()).sqrt();
                vec![mid - r, mid + r]
            }
            StateDim::Three => {
                let h = |i: usize, j: usize| 0.5 * (self.m[i][j] + self.m[j][i].conj());
                let d = [self.m[0][0].re, self.m[1][1].re, self.m[2][2].re];
                let (a01, a02, a12) = (h(0, 1), h(0, 2), h(1, 2));
                let q = (d[0] + d[1] + d[2]) / 3.0;
                let p1 = a01.norm_sqr() + a02.norm_sqr() + a12.norm_sqr();
                let p2 =
                    (d[0] - q).powi(2) + (d[1] - q).powi(2) + (d[2] - q).powi(2) + 2.0 * p1;
                let p = (p2 / 6.0).sqrt();
                if p < 1e-300 {
                    return vec![q, q, q];
                }
                let bd = [(d[0] - q) / p, (d[1] - q) / p, (d[2] - q) / p];
                let (b01, b02, b12) = (a01 / p, a02 / p, a12 / p);
                // det(B) is real for Hermitian B; expand along the first row
                let det = bd[0] * (bd[1] * bd[2] - b12.norm_sqr())
                    - (b01 * (b01.conj() * bd[2] - b12 * b02.conj())).re
                    + (b02 * (b01.conj() * b12.conj() - bd[1] * b02.conj())).re;
                let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
                let e1 = q + 2.0 * p * phi.cos();
                let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
                let e2 = 3.0 * q - e1 - e3;
                let mut eigs = vec![e1, e2, e3];
                eigs.sort_by(f64::total_cmp);
                eigs
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Check the physical-state invariants at the stated tolerances.
    pub fn check_physical(&self) -> Result<()> {
        if self.hermiticity_error() > 1e-12 {
            return Err(Error::domain(format!(
                "state is not Hermitian (deviation {})",
                self.hermiticity_error()
            )));
        }
        if (self.trace() - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("trace = {} is not 1", self.trace())));
        }
        if self.min_eigenvalue() < -1e-9 {
            return Err(Error::domain(format!(
                "negative eigenvalue {}",
                self.min_eigenvalue()
            )));
        }
        Ok(())
    }
}

/// Amplitude-damping and pure-dephasing rates, 1/ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseChannels {
    pub gamma1_per_ns: f64,
    pub gamma_phi_per_ns: f64,
}

impl NoiseChannels {
    /// From lifetimes in us: Gamma_1 = 1/T1, Gamma_phi = 1/T2 - 1/(2 T1).
    /// Infinite lifetimes switch the channels off.
    pub fn from_lifetimes(t1_us: f64, t2_us: f64) -> Result<Self> {
        if t1_us.is_nan() || t1_us <= 0.0 || t2_us.is_nan() || t2_us <= 0.0 {
            return Err(Error::domain(format!(
                "lifetimes must be positive, got T1 = {t1_us}, T2 = {t2_us} us"
            )));
        }
        let gamma1 = if t1_us.is_infinite() { 0.0 } else { 1e-3 / t1_us };
        let gamma2 = if t2_us.is_infinite() { 0.0 } else { 1e-3 / t2_us };
        let gamma_phi = gamma2 - gamma1 / 2.0;
        if gamma_phi < -1e-15 {
            return Err(Error::domain(format!(
                "T2 = {t2_us} us exceeds 2 T1 = {} us",
                2.0 * t1_us
            )));
        }
        Ok(Self { gamma1_per_ns: gamma1, gamma_phi_per_ns: gamma_phi.max(0.0) })
    }
}

/// Integrator controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// RK4 step during pulses, ns.
    pub dt_ns: f64,
    pub dim: StateDim,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { dt_ns: 0.05, dim: StateDim::Two }
    }
}

impl SimOptions {
    /// Defaults satisfying the step-size bound for each dimension (the
    /// three-level ladder adds the anharmonicity to the rate budget).
    pub fn for_dim(dim: StateDim) -> Self {
        match dim {
            StateDim::Two => Self { dt_ns: 0.05, dim },
            StateDim::Three => Self { dt_ns: 0.01, dim },
        }
    }
}

/// Upper bound on dt * max(rate) accepted by the integrator, rad.
const STEP_PHASE_BOUND: f64 = 0.05;

struct PulseGenerator {
    dim: usize,
    /// angular drive detuning, rad/ns
    delta: f64,
    /// angular anharmonicity, rad/ns (three-level only)
    eta: f64,
    phase: C64,
    envelope: Envelope,
    noise: NoiseChannels,
}

impl PulseGenerator {
    fn hamiltonian(&self, t_in_pulse: f64) -> M3 {
        let mut h = M3_ZERO;
        h[1][1] = C64::new(-self.delta, 0.0);
        // RK4 stage times can drift one ulp past the window; clamp so the
        // final k4 stage still samples the envelope
        let t = t_in_pulse.clamp(0.0, self.envelope.duration_ns);
        let half_rabi = 0.5 * self.envelope.value(t);
        let drive01 = self.phase * half_rabi;
        h[1][0] = drive01;
        h[0][1] = drive01.conj();
        if self.dim == 3 {
            h[2][2] = C64::new(-2.0 * self.delta + self.eta, 0.0);
            let drive12 = self.phase * (half_rabi * std::f64::consts::SQRT_2);
            h[2][1] = drive12;
            h[1][2] = drive12.conj();
        }
        h
    }

    /// Lindblad right-hand side:
    /// -i[H, rho] + Gamma_1 D[lower] rho + 2 Gamma_phi D[n] rho.
    /// On two levels the dephasing term equals (Gamma_phi/2) D[sigma_z],
    /// since the identity part of n drops out of the dissipator.
    fn rhs(&self, h: &M3, rho: &M3) -> M3 {
        let d = self.dim;
        let mut out = M3_ZERO;
        let i_unit = C64::new(0.0, 1.0);
        for r in 0..d {
            for c in 0..d {
                let mut comm = C64::new(0.0, 0.0);
                for k in 0..d {
                    comm += h[r][k] * rho[k][c] - rho[r][k] * h[k][c];
                }
                out[r][c] = -i_unit * comm;
            }
        }
        let g1 = self.noise.gamma1_per_ns;
        if g1 > 0.0 {
            // lowering operator |0><1| + sqrt(2) |1><2|; L^dag L = diag(0,1,2)
            let weight = |k: usize| k as f64;
            for r in 0..d {
                for c in 0..d {
                    out[r][c] -= g1 * 0.5 * (weight(r) + weight(c)) * rho[r][c];
                }
            }
            out[0][0] += g1 * rho[1][1];
            if d == 3 {
                let s2 = std::f64::consts::SQRT_2;
                out[1][1] += 2.0 * g1 * rho[2][2];
                out[0][1] += g1 * s2 * rho[1][2];
                out[1][0] += g1 * s2 * rho[2][1];
            }
        }
        let gphi = self.noise.gamma_phi_per_ns;
        if gphi > 0.0 {
            // 2 Gamma_phi D[n]: rho_jk decays at Gamma_phi (j - k)^2
            for r in 0..d {
                for c in 0..d {
                    let diff = r as f64 - c as f64;
                    out[r][c] -= gphi * diff * diff * rho[r][c];
                }
            }
        }
        out
    }
}

fn m3_axpy(dst: &mut M3, a: f64, src: &M3, dim: usize) {
    for (drow, srow) in dst.iter_mut().zip(src.iter()).take(dim) {
        for (dv, sv) in drow.iter_mut().zip(srow.iter()).take(dim) {
            *dv += a * sv;
        }
    }
}

/// One classical RK4 step of size `h` at pulse-local time `t`.
fn rk4_step(gen: &PulseGenerator, rho: &M3, t: f64, h: f64) -> M3 {
    let dim = gen.dim;
    let h1 = gen.hamiltonian(t);
    let h2 = gen.hamiltonian(t + 0.5 * h);
    let h4 = gen.hamiltonian(t + h);

    let k1 = gen.rhs(&h1, rho);
    let mut tmp = *rho;
    m3_axpy(&mut tmp, 0.5 * h, &k1, dim);
    let k2 = gen.rhs(&h2, &tmp);
    tmp = *rho;
    m3_axpy(&mut tmp, 0.5 * h, &k2, dim);
    let k3 = gen.rhs(&h2, &tmp);
    tmp = *rho;
    m3_axpy(&mut tmp, h, &k3, dim);
    let k4 = gen.rhs(&h4, &tmp);

    let mut out = *rho;
    m3_axpy(&mut out, h / 6.0, &k1, dim);
    m3_axpy(&mut out, h / 3.0, &k2, dim);
    m3_axpy(&mut out, h / 3.0, &k3, dim);
    m3_axpy(&mut out, h / 6.0, &k4, dim);
    out
}

/// Diagonal frame conjugation rho_jk *= exp(i theta (j - k)).
fn conjugate_phase(rho: &mut M3, theta: f64, dim: usize) {
    for (j, row) in rho.iter_mut().enumerate().take(dim) {
        for (k, v) in row.iter_mut().enumerate().take(dim) {
            if j != k {
                *v *= C64::new(0.0, theta * (j as f64 - k as f64)).exp();
            }
        }
    }
}

/// Exact dissipative map for an idle of length `t` ns in the qubit frame.
fn idle_map(rho: &mut M3, t: f64, noise: &NoiseChannels, dim: usize, eta: f64) {
    if t <= 0.0 {
        return;
    }
    let g1 = noise.gamma1_per_ns;
    let gphi = noise.gamma_phi_per_ns;
    let e1 = (-g1 * t).exp();
    let ecoh = (-(0.5 * g1 + gphi) * t).exp();
    if dim == 2 {
        let p1 = rho[1][1].re;
        rho[0][0] += C64::new(p1 * (1.0 - e1), 0.0);
        rho[1][1] = C64::new(p1 * e1, 0.0);
        rho[0][1] *= ecoh;
        rho[1][0] = rho[0][1].conj();
        return;
    }
    // three levels: cascade decay |2> -> |1> -> |0> at rates 2 Gamma_1 and
    // Gamma_1; coherences involving |2> precess at the anharmonicity, and
    // the decay of rho_12 feeds rho_01 through the lowering operator
    let e2 = (-2.0 * g1 * t).exp();
    let p1 = rho[1][1].re;
    let p2 = rho[2][2].re;
    let p2_new = p2 * e2;
    let p1_new = p1 * e1 + 2.0 * p2 * (e1 - e2);
    rho[0][0] += C64::new((p1 - p1_new) + (p2 - p2_new), 0.0);
    rho[1][1] = C64::new(p1_new, 0.0);
    rho[2][2] = C64::new(p2_new, 0.0);

    let a = 0.5 * g1 + gphi;
    let b = C64::new(-1.5 * g1 - gphi, eta);
    let rho12_0 = rho[1][2];
    rho[1][2] = rho12_0 * (b * t).exp();
    rho[2][1] = rho[1][2].conj();
    rho[0][2] *= (C64::new(-g1 - 4.0 * gphi, eta) * t).exp();
    rho[2][0] = rho[0][2].conj();
    // d/dt rho_01 = -a rho_01 + sqrt(2) Gamma_1 rho_12(t)
    let sum = b + C64::new(a, 0.0);
    let transfer = if sum.norm() * t < 1e-12 {
        C64::new(t * (-a * t).exp(), 0.0)
    } else {
        ((b * t).exp() - C64::new((-a * t).exp(), 0.0)) / sum
    };
    rho[0][1] = rho[0][1] * ecoh + std::f64::consts::SQRT_2 * g1 * rho12_0 * transfer;
    rho[1][0] = rho[0][1].conj();
}

/// Time-resolved output of [`evolve`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times_ns: Vec<f64>,
    pub states: Vec<DensityState>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityState {
        self.states.last().expect("trajectory has at least the initial sample")
    }
}

const SCHEDULE_EPS: f64 = 1e-9;

fn run_sequence(
    initial: &DensityState,
    seq: &PulseSequence,
    device: &DeviceSpec,
    opts: &SimOptions,
    mut record: impl FnMut(f64, &M3),
) -> Result<M3> {
    let dim = opts.dim.size();
    if initial.dim() != opts.dim {
        return Err(Error::usage(format!(
            "initial state dimension {:?} does not match simulation dimension {:?}",
            initial.dim(),
            opts.dim
        )));
    }
    if opts.dt_ns <= 0.0 {
        return Err(Error::config(format!("dt = {} ns must be positive", opts.dt_ns)));
    }
    let noise = NoiseChannels::from_lifetimes(device.transmon.t1, device.transmon.t2)?;
    let eta = TWO_PI * device.transmon.eta_f;

    let mut rho = initial.m;
    let mut cursor = 0.0f64;
    record(0.0, &rho);

    for pulse in seq.xy_pulses() {
        let gap = pulse.start_ns - cursor;
        if gap > SCHEDULE_EPS {
            idle_map(&mut rho, gap, &noise, dim, eta);
            record(pulse.start_ns, &rho);
        }
        let delta = TWO_PI * pulse.drive_detuning_ghz;
        let generator = PulseGenerator {
            dim,
            delta,
            eta,
            phase: C64::new(0.0, pulse.phase_rad).exp(),
            envelope: pulse.envelope,
            noise,
        };
        let mut max_rate = delta
            .abs()
            .max(pulse.envelope.peak_amplitude.abs())
            .max(noise.gamma1_per_ns)
            .max(noise.gamma_phi_per_ns);
        if dim == 3 {
            max_rate = max_rate.max(eta.abs()).max((2.0 * delta - eta).abs());
        }
        if opts.dt_ns * max_rate >= STEP_PHASE_BOUND {
            return Err(Error::config(format!(
                "step bound violated: dt = {} ns at max rate {:.4} rad/ns gives \
                 {:.4} rad per step (limit {STEP_PHASE_BOUND}); reduce dt",
                opts.dt_ns,
                max_rate,
                opts.dt_ns * max_rate
            )));
        }

        // enter the drive frame at the pulse start
        conjugate_phase(&mut rho, delta * pulse.start_ns, dim);
        let steps = (pulse.envelope.duration_ns / opts.dt_ns).ceil().max(1.0) as usize;
        let h = pulse.envelope.duration_ns / steps as f64;
        for k in 0..steps {
            rho = rk4_step(&generator, &rho, k as f64 * h, h);
        }
        // back to the qubit frame at the pulse end
        let end = pulse.end_ns();
        conjugate_phase(&mut rho, -delta * end, dim);
        cursor = end;
        record(end, &rho);
    }

    let tail = seq.readout_start_ns() - cursor;
    if tail > SCHEDULE_EPS {
        idle_map(&mut rho, tail, &noise, dim, eta);
        record(seq.readout_start_ns(), &rho);
    }
    Ok(rho)
}

/// Evolve an initial state through the sequence up to the readout window,
/// recording the state at every pulse edge and idle boundary.
pub fn evolve(
    initial: &DensityState,
    seq: &PulseSequence,
    device: &DeviceSpec,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let dim = opts.dim;
    run_sequence(initial, seq, device, opts, |t, m| {
        times.push(t);
        states.push(DensityState { dim, m: *m });
    })?;
    Ok(Trajectory { times_ns: times, states })
}

/// Evolve and keep only the state at the readout start.
pub fn evolve_final(
    initial: &DensityState,
    seq: &PulseSequence,
    device: &DeviceSpec,
    opts: &SimOptions,
) -> Result<DensityState> {
    let m = run_sequence(initial, seq, device, opts, |_, _| {})?;
    Ok(DensityState { dim: opts.dim, m })
}

/// Ideal-pulse Ramsey model: P_e(tau) = 1/2 + 1/2 exp(-tau/T2)
/// cos(2 pi detuning tau). Instantaneous pi/2 pulses assumed; the
/// longitudinal decay channel rotates into the unmeasured quadrature, so
/// T1 does not enter.
pub fn ramsey_closed_form(tau_ns: f64, detuning_ghz: f64, t2_us: f64) -> f64 {
    let decay = if t2_us.is_infinite() { 1.0 } else { (-tau_ns / (1e3 * t2_us)).exp() };
    0.5 + 0.5 * decay * (TWO_PI * detuning_ghz * tau_ns).cos()
}

/// Closed-form detuned Rabi excited-state population for a rectangle drive
/// of Rabi rate `omega` (rad/ns) and angular detuning `delta` (rad/ns).
pub fn rabi_closed_form(omega: f64, delta: f64, tau_ns: f64) -> f64 {
    let w2 = omega * omega + delta * delta;
    if w2 == 0.0 {
        return 0.0;
    }
    (omega * omega / w2) * (0.5 * w2.sqrt() * tau_ns).sin().powi(2)
}
