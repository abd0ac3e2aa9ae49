//! Dispersive single-shot readout: the statistical I-Q model, binary
//! discrimination, population estimation, and the feedline response.
//!
//! The 500 ns readout window is folded into fixed cloud parameters
//! (means, width, assignment errors); no resonator trajectory is
//! simulated. Shots are keyed draws, so any evaluation order reproduces
//! the same records bit for bit.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dynamics::DensityState;
use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// A point in the measurement I-Q plane (volt-arbitrary units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqPoint {
    pub i: f64,
    pub q: f64,
}

impl IqPoint {
    pub fn distance_sq(&self, other: &IqPoint) -> f64 {
        let di = self.i - other.i;
        let dq = self.q - other.q;
        di * di + dq * dq
    }
}

/// Gaussian two-cloud readout model with explicit assignment errors.
///
/// `eps0` and `eps1` are the probabilities that a true |0> (|1>) lands in
/// the wrong cloud. The recorded bit is always re-derived from the drawn
/// I-Q point, so cloud overlap (quantified by [`separation_fidelity`])
/// adds to the effective error on top of the eps knobs; shipped models
/// keep the clouds 10 sigma apart, making that contribution negligible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutModel {
    pub mean_ground: IqPoint,
    pub mean_excited: IqPoint,
    pub sigma: f64,
    pub eps0: f64,
    pub eps1: f64,
}

impl ReadoutModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.eps0) || !(0.0..0.5).contains(&self.eps1) {
            return Err(Error::domain(format!(
                "assignment errors must lie in [0, 0.5), got eps0 = {}, eps1 = {}",
                self.eps0, self.eps1
            )));
        }
        if self.sigma <= 0.0 {
            return Err(Error::domain(format!("cloud width must be positive, got {}", self.sigma)));
        }
        if self.mean_ground == self.mean_excited {
            return Err(Error::domain("readout cloud means coincide".to_string()));
        }
        Ok(())
    }
}

/// One projective readout record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub iq: IqPoint,
    pub bit: u8,
    pub sequence_id: u64,
    pub shot_index: u64,
    pub rng_stream_id: u64,
}

/// Minimum-distance classification against the two cloud means, i.e. the
/// perpendicular bisector of the segment between them. Exact ties resolve
/// to 0.
pub fn discriminate(iq: &IqPoint, model: &ReadoutModel) -> u8 {
    if iq.distance_sq(&model.mean_excited) < iq.distance_sq(&model.mean_ground) {
        1
    } else {
        0
    }
}

/// Draw one projective readout from the state through the I-Q model.
///
/// Born-rule draw of the measured level, assignment error applied with
/// probability eps, then a gaussian I-Q point about the recorded class
/// mean. For three-level states, population in |2> is recorded as 1 (no
/// three-outcome discrimination is modeled).
pub fn sample_shot(
    state: &DensityState,
    model: &ReadoutModel,
    key: StreamKey,
) -> ShotRecord {
    let p_excited = state.excited_population() + state.leakage_population();
    sample_shot_from_probability(p_excited, model, key)
}

/// Same as [`sample_shot`] for a known excited-state probability.
pub fn sample_shot_from_probability(
    p_excited: f64,
    model: &ReadoutModel,
    key: StreamKey,
) -> ShotRecord {
    let mut rng = key.rng();
    let projected_excited = rng.random::<f64>() < p_excited;
    let eps = if projected_excited { model.eps1 } else { model.eps0 };
    let flip = rng.random::<f64>() < eps;
    let recorded_excited = projected_excited ^ flip;
    let mean = if recorded_excited { model.mean_excited } else { model.mean_ground };
    let ni: f64 = StandardNormal.sample(&mut rng);
    let nq: f64 = StandardNormal.sample(&mut rng);
    let iq = IqPoint { i: mean.i + model.sigma * ni, q: mean.q + model.sigma * nq };
    ShotRecord {
        iq,
        bit: discriminate(&iq, model),
        sequence_id: key.sequence_id,
        shot_index: key.index,
        rng_stream_id: key.stream_id(),
    }
}

/// Equal-prior correct-assignment probability of the two gaussian clouds
/// before assignment errors: 1 - erfc(d / (2 sqrt(2) sigma)) / 2.
pub fn separation_fidelity(model: &ReadoutModel) -> Result<f64> {
    model.validate()?;
    let d = model.mean_ground.distance_sq(&model.mean_excited).sqrt();
    Ok(1.0 - 0.5 * erfc(d / (2.0 * std::f64::consts::SQRT_2 * model.sigma)))
}

/// Sample mean and binomial standard error of the recorded bits.
pub fn estimate_population(shots: &[ShotRecord]) -> Result<(f64, f64)> {
    if shots.is_empty() {
        return Err(Error::usage("cannot estimate a population from zero shots".to_string()));
    }
    let n = shots.len() as f64;
    let p = shots.iter().map(|s| s.bit as f64).sum::<f64>() / n;
    Ok((p, (p * (1.0 - p) / n).sqrt()))
}

/// Notch (hanger) feedline transmission:
/// S21(f) = 1 - (Q_total/Q_e) / (1 + 2 i Q_total (f - f_r) / f_r).
pub fn s21_hanger(f_ghz: f64, f_r_ghz: f64, q_internal: f64, q_external: f64) -> Result<C64> {
    if q_internal <= 0.0 || q_external <= 0.0 {
        return Err(Error::domain(format!(
            "quality factors must be positive, got Q_i = {q_internal}, Q_e = {q_external}"
        )));
    }
    let q_total = 1.0 / (1.0 / q_internal + 1.0 / q_external);
    let denom = C64::new(1.0, 2.0 * q_total * (f_ghz - f_r_ghz) / f_r_ghz);
    Ok(C64::new(1.0, 0.0) - C64::new(q_total / q_external, 0.0) / denom)
}

/// Hanger response conditioned on the qubit state: the resonator sits at
/// f_r + chi with the qubit in |0> and f_r - chi in |1>, so the two dips
/// are 2 chi apart.
pub fn s21_hanger_conditioned(
    f_ghz: f64,
    f_r_ghz: f64,
    q_internal: f64,
    q_external: f64,
    chi_ghz: f64,
    excited: bool,
) -> Result<C64> {
    let center = if excited { f_r_ghz - chi_ghz } else { f_r_ghz + chi_ghz };
    s21_hanger(f_ghz, center, q_internal, q_external)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StateDim;
    use crate::rng::domain;

    fn model() -> ReadoutModel {
        ReadoutModel {
            mean_ground: IqPoint { i: 1.0, q: 0.0 },
            mean_excited: IqPoint { i: -1.0, q: 0.0 },
            sigma: 0.2,
            eps0: 0.05,
            eps1: 0.05,
        }
    }

    fn key(seq: u64, shot: u64) -> StreamKey {
        StreamKey::new(11, domain::SHOT, seq, shot)
    }

    #[test]
    fn discriminate_basics() {
        let m = model();
        assert_eq!(discriminate(&m.mean_ground, &m), 0);
        assert_eq!(discriminate(&m.mean_excited, &m), 1);
        // midpoint ties break to ground
        let mid = IqPoint {
            i: 0.5 * (m.mean_ground.i + m.mean_excited.i),
            q: 0.5 * (m.mean_ground.q + m.mean_excited.q),
        };
        assert_eq!(discriminate(&mid, &m), 0);
    }

    #[test]
    fn ground_state_with_no_errors_reads_zero() {
        let mut m = model();
        m.eps0 = 0.0;
        let state = DensityState::ground(StateDim::Two);
        for shot in 0..2000 {
            let rec = sample_shot(&state, &m, key(0, shot));
            assert_eq!(rec.bit, 0);
        }
    }

    #[test]
    fn excited_state_mean_matches_binomial_oracle() {
        let mut m = model();
        m.eps0 = 0.0;
        m.eps1 = 0.05;
        let state = DensityState::excited(StateDim::Two);
        let n = 100_000u64;
        let shots: Vec<ShotRecord> =
            (0..n).map(|s| sample_shot(&state, &m, key(1, s))).collect();
        let (p, se) = estimate_population(&shots).unwrap();
        let expected = 0.95;
        let sigma_binomial = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!(
            (p - expected).abs() < 3.0 * sigma_binomial,
            "p = {p}, expected {expected} +- {sigma_binomial}"
        );
        assert!((se - sigma_binomial).abs() / sigma_binomial < 0.05);
    }

    #[test]
    fn superposition_reads_half() {
        let mut m = model();
        m.eps0 = 0.0;
        m.eps1 = 0.0;
        let state = DensityState::mixed(StateDim::Two, &[0.5, 0.5]).unwrap();
        let n = 100_000u64;
        let shots: Vec<ShotRecord> =
            (0..n).map(|s| sample_shot(&state, &m, key(2, s))).collect();
        let (p, _) = estimate_population(&shots).unwrap();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((p - 0.5).abs() < 3.0 * sigma, "p = {p}");
    }

    #[test]
    fn leakage_is_recorded_as_excited() {
        let mut m = model();
        m.eps0 = 0.0;
        m.eps1 = 0.0;
        let state = DensityState::mixed(StateDim::Three, &[0.0, 0.0, 1.0]).unwrap();
        for shot in 0..100 {
            assert_eq!(sample_shot(&state, &m, key(3, shot)).bit, 1);
        }
    }

    #[test]
    fn rediscrimination_reproduces_stored_bits() {
        let m = model();
        let state = DensityState::mixed(StateDim::Two, &[0.3, 0.7]).unwrap();
        for shot in 0..10_000 {
            let rec = sample_shot(&state, &m, key(4, shot));
            assert_eq!(rec.bit, discriminate(&rec.iq, &m));
        }
    }

    #[test]
    fn shots_are_reproducible_and_keyed() {
        let m = model();
        let state = DensityState::mixed(StateDim::Two, &[0.4, 0.6]).unwrap();
        let a = sample_shot(&state, &m, key(5, 123));
        let b = sample_shot(&state, &m, key(5, 123));
        assert_eq!(a, b);
        let c = sample_shot(&state, &m, key(5, 124));
        assert_ne!(a.iq.i, c.iq.i);
    }

    #[test]
    fn separation_fidelity_limits() {
        let mut m = model();
        m.mean_excited = IqPoint { i: 1.0 + 1e-12, q: 0.0 };
        assert!((separation_fidelity(&m).unwrap() - 0.5).abs() < 1e-11);
        m.mean_excited = IqPoint { i: 1e12, q: 0.0 };
        assert!((separation_fidelity(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separation_fidelity_matches_monte_carlo() {
        // 4 sigma separation, 1e6 draws against the erfc closed form
        let m = ReadoutModel {
            mean_ground: IqPoint { i: 0.0, q: 0.0 },
            mean_excited: IqPoint { i: 0.8, q: 0.0 },
            sigma: 0.2,
            eps0: 0.0,
            eps1: 0.0,
        };
        let analytic = separation_fidelity(&m).unwrap();
        let n = 1_000_000u64;
        let mut correct = 0u64;
        for s in 0..n {
            // alternate true classes with equal priors
            let excited = s % 2 == 1;
            let p = if excited { 1.0 } else { 0.0 };
            let rec = sample_shot_from_probability(p, &m, key(6, s));
            if (rec.bit == 1) == excited {
                correct += 1;
            }
        }
        let mc = correct as f64 / n as f64;
        let sigma_binomial = (analytic * (1.0 - analytic) / n as f64).sqrt();
        assert!(
            (mc - analytic).abs() < 3.0 * sigma_binomial,
            "monte carlo {mc} vs closed form {analytic} (sigma {sigma_binomial})"
        );
    }

    #[test]
    fn standard_error_shrinks_as_inverse_sqrt_n() {
        let m = model();
        let state = DensityState::mixed(StateDim::Two, &[0.7, 0.3]).unwrap();
        let mut ses = Vec::new();
        for (case, n) in [100u64, 10_000, 1_000_000].iter().enumerate() {
            let shots: Vec<ShotRecord> =
                (0..*n).map(|s| sample_shot(&state, &m, key(7 + case as u64, s))).collect();
            let (_, se) = estimate_population(&shots).unwrap();
            ses.push(se);
        }
        // each factor-100 increase in n shrinks SE by about 10
        assert!((ses[0] / ses[1] - 10.0).abs() < 1.5);
        assert!((ses[1] / ses[2] - 10.0).abs() < 1.5);
    }

    #[test]
    fn empty_shot_list_is_a_usage_error() {
        assert!(matches!(estimate_population(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn estimate_population_formula_cases() {
        let shot = |bit: u8| ShotRecord {
            iq: IqPoint { i: 0.0, q: 0.0 },
            bit,
            sequence_id: 0,
            shot_index: 0,
            rng_stream_id: 0,
        };
        let all_ones: Vec<ShotRecord> = (0..100).map(|_| shot(1)).collect();
        let (p, se) = estimate_population(&all_ones).unwrap();
        assert_eq!((p, se), (1.0, 0.0));

        let half: Vec<ShotRecord> =
            (0..10_000).map(|k| shot((k % 2 == 0) as u8)).collect();
        let (p, se) = estimate_population(&half).unwrap();
        assert_eq!(p, 0.5);
        assert!((se - 0.005).abs() < 1e-12);
    }

    #[test]
    fn hanger_response_shape() {
        let (f_r, q_i, q_e) = (6.868, 5.8e3, 12.9e3);
        let q_t = 1.0 / (1.0 / q_i + 1.0 / q_e);
        let at_center = s21_hanger(f_r, f_r, q_i, q_e).unwrap();
        assert!((at_center.norm() - (1.0 - q_t / q_e)).abs() < 1e-12);
        let far = s21_hanger(f_r + 1.0, f_r, q_i, q_e).unwrap();
        assert!((far - C64::new(1.0, 0.0)).norm() < 1e-2);
        assert!(s21_hanger(f_r, f_r, -1.0, q_e).is_err());
    }

    #[test]
    fn conditioned_dips_are_2chi_apart() {
        let (f_r, q_i, q_e, chi) = (7.143, 45.8e3, 6.1e3, 0.0035);
        // dip minima sit at the shifted centers
        let g = s21_hanger_conditioned(f_r + chi, f_r, q_i, q_e, chi, false).unwrap();
        let e = s21_hanger_conditioned(f_r - chi, f_r, q_i, q_e, chi, true).unwrap();
        let q_t = 1.0 / (1.0 / q_i + 1.0 / q_e);
        assert!((g.norm() - (1.0 - q_t / q_e)).abs() < 1e-12);
        assert!((e.norm() - (1.0 - q_t / q_e)).abs() < 1e-12);
        // and 2 chi = 7 MHz for this parameter set
        assert!((2.0 * chi - 0.0070).abs() < 1e-12);
    }

    #[test]
    fn model_validation() {
        let mut m = model();
        m.eps0 = 0.5;
        assert!(m.validate().is_err());
        let mut m = model();
        m.sigma = 0.0;
        assert!(m.validate().is_err());
        let mut m = model();
        m.mean_excited = m.mean_ground;
        assert!(m.validate().is_err());
    }
}
