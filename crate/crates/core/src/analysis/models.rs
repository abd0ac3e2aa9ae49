//! The five measurement model families and their weighted fits:
//! exponential decay, Ramsey fringes, benchmarking decay, the complex
//! hanger response, and the benchmarking fidelity algebra on top.
//!
//! All initial guesses are deterministic functions of the data, documented
//! at each fit.

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::nlls::{nlls_minimize, NllsOptions, NllsOutcome};
use crate::error::{Error, Result};

/// A converged (or flagged) weighted least-squares fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model: &'static str,
    pub parameter_names: Vec<&'static str>,
    pub parameters: Vec<f64>,
    /// 1-sigma uncertainties from the scaled Jacobian covariance.
    pub uncertainties: Vec<f64>,
    /// Weighted residual sum of squares at the optimum.
    pub residual_sum_squares: f64,
    pub iterations: usize,
    /// False means the estimates are not reportable.
    pub converged: bool,
    pub flags: Vec<String>,
}

impl FitResult {
    pub fn parameter(&self, name: &str) -> Result<f64> {
        self.index_of(name).map(|k| self.parameters[k])
    }

    pub fn uncertainty(&self, name: &str) -> Result<f64> {
        self.index_of(name).map(|k| self.uncertainties[k])
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.parameter_names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::usage(format!("model {} has no parameter '{name}'", self.model)))
    }

    fn from_outcome(
        model: &'static str,
        names: Vec<&'static str>,
        outcome: NllsOutcome,
        mut flags: Vec<String>,
    ) -> Self {
        if outcome.singular {
            flags.push("singular-information-matrix".to_string());
        }
        if !outcome.converged {
            flags.push("did-not-converge".to_string());
        }
        FitResult {
            model,
            parameter_names: names,
            parameters: outcome.parameters,
            uncertainties: outcome.uncertainties,
            residual_sum_squares: outcome.cost,
            iterations: outcome.iterations,
            converged: outcome.converged && !outcome.singular,
            flags,
        }
    }
}

/// Standard-error floor 1/(2n) keeping zero-variance points (p = 0 or 1)
/// out of the weights.
pub fn floor_se(se: &[f64], shots_per_point: &[u64]) -> Vec<f64> {
    se.iter()
        .zip(shots_per_point)
        .map(|(s, n)| s.max(1.0 / (2.0 * (*n).max(1) as f64)))
        .collect()
}

fn check_series(x: &[f64], y: &[f64], se: &[f64], min_points: usize, what: &str) -> Result<()> {
    if x.len() != y.len() || x.len() != se.len() {
        return Err(Error::usage(format!(
            "{what}: length mismatch x = {}, y = {}, se = {}",
            x.len(),
            y.len(),
            se.len()
        )));
    }
    if x.len() < min_points {
        return Err(Error::usage(format!(
            "{what}: need at least {min_points} points, got {}",
            x.len()
        )));
    }
    if se.iter().any(|s| s.is_nan() || *s <= 0.0) {
        return Err(Error::usage(format!("{what}: standard errors must be positive")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::usage(format!("{what}: data contain non-finite values")));
    }
    Ok(())
}

/// Weighted fit of A exp(-x/tau) + offset.
///
/// Initial guess: offset from the tail mean, amplitude from the first
/// point, tau from log-linear regression on the baseline-subtracted data.
pub fn fit_exponential(x: &[f64], y: &[f64], se: &[f64]) -> Result<FitResult> {
    check_series(x, y, se, 4, "exponential fit")?;
    let n = x.len();
    let tail = n.div_ceil(5).max(2);
    let offset0 = y[n - tail..].iter().sum::<f64>() / tail as f64;
    let mut amp0 = y[0] - offset0;
    if amp0.abs() < 1e-12 {
        amp0 = 1e-3;
    }
    let span = x[n - 1] - x[0];
    let tau0 = log_linear_tau(x, y, offset0, amp0).unwrap_or(span / 3.0);

    let model = |p: &[f64], xi: f64| p[0] * (-xi / p[1]).exp() + p[2];
    let residuals = |p: &[f64]| -> Vec<f64> {
        x.iter().zip(y).zip(se).map(|((xi, yi), si)| (model(p, *xi) - yi) / si).collect()
    };
    let opts = NllsOptions {
        bounds: Some(vec![
            (-10.0, 10.0),
            (span * 1e-6, span * 1e6),
            (-10.0, 10.0),
        ]),
        fd_scales: Some(vec![1.0, span, 1.0]),
        ..Default::default()
    };
    let outcome = nlls_minimize(residuals, &[amp0, tau0.max(span * 1e-6), offset0], &opts)?;

    let mut flags = Vec::new();
    let mut degenerate = false;
    let amp = outcome.parameters[0];
    let amp_sigma = outcome.uncertainties[0];
    if !amp_sigma.is_finite() || amp.abs() < 2.0 * amp_sigma || amp.abs() < 1e-6 {
        flags.push("amplitude-unresolved".to_string());
        degenerate = true;
    }
    let mut result =
        FitResult::from_outcome("exponential", vec!["amplitude", "tau", "offset"], outcome, flags);
    if degenerate {
        result.converged = false;
    }
    Ok(result)
}

fn log_linear_tau(x: &[f64], y: &[f64], offset: f64, amp: f64) -> Option<f64> {
    let sign = amp.signum();
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter_map(|(xi, yi)| {
            let v = (yi - offset) * sign;
            (v > 0.05 * amp.abs()).then(|| (*xi, v.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    (slope < 0.0).then(|| -1.0 / slope)
}

/// Weighted fit of A exp(-x/T2) cos(2 pi f x + phi) + offset.
///
/// The frequency guess is the argmax of a 4x-oversampled discrete
/// periodogram of the detrended data; amplitude and phase guesses come
/// from the quadrature sums at that frequency.
pub fn fit_ramsey(x: &[f64], y: &[f64], se: &[f64]) -> Result<FitResult> {
    check_series(x, y, se, 6, "ramsey fit")?;
    let n = x.len();
    let span = x[n - 1] - x[0];
    if span <= 0.0 {
        return Err(Error::usage("ramsey fit: empty x span".to_string()));
    }
    let offset0 = y.iter().sum::<f64>() / n as f64;
    let detrended: Vec<f64> = y.iter().map(|v| v - offset0).collect();
    let (f0, quad) = periodogram_peak(x, &detrended, span);
    let amp0 = (2.0 * quad.norm() / n as f64).max(1e-4);
    let phase0 = quad.arg();
    let t2_0 = span / 2.0;

    let model = |p: &[f64], xi: f64| {
        p[0] * (-xi / p[1]).exp() * (2.0 * std::f64::consts::PI * p[2] * xi + p[3]).cos() + p[4]
    };
    let residuals = |p: &[f64]| -> Vec<f64> {
        x.iter().zip(y).zip(se).map(|((xi, yi), si)| (model(p, *xi) - yi) / si).collect()
    };
    let dx_min = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let nyquist = 0.5 / dx_min.max(1e-300);
    let opts = NllsOptions {
        bounds: Some(vec![
            (-10.0, 10.0),
            (span * 1e-6, span * 1e6),
            (0.0, 1.5 * nyquist),
            (-2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI),
            (-10.0, 10.0),
        ]),
        // the frequency lives on the 1/span scale, far below unity
        fd_scales: Some(vec![1.0, span, f0.max(1.0 / span), 1.0, 1.0]),
        ..Default::default()
    };
    let outcome = nlls_minimize(residuals, &[amp0, t2_0, f0, phase0, offset0], &opts)?;

    let mut flags = Vec::new();
    // identifiability: less than one fringe in the window means the
    // frequency is indistinguishable from a slow drift
    if outcome.parameters[2] * span < 1.0 {
        flags.push("frequency-unresolved".to_string());
    }
    Ok(FitResult::from_outcome(
        "ramsey",
        vec!["amplitude", "t2", "frequency", "phase", "offset"],
        outcome,
        flags,
    ))
}

fn periodogram_peak(x: &[f64], detrended: &[f64], span: f64) -> (f64, C64) {
    let n = x.len();
    let oversample = 4;
    let k_max = (n * oversample) / 2;
    let mut best = (0.0f64, C64::new(0.0, 0.0), -1.0f64);
    for k in 1..=k_max {
        let f = k as f64 / (oversample as f64 * span);
        let mut c = C64::new(0.0, 0.0);
        for (xi, di) in x.iter().zip(detrended) {
            let theta = -2.0 * std::f64::consts::PI * f * xi;
            c += di * C64::new(0.0, theta).exp();
        }
        let power = c.norm_sqr();
        if power > best.2 {
            best = (f, c, power);
        }
    }
    (best.0, best.1)
}

/// Weighted fit of the benchmarking decay c1 + c2 p^N with p constrained
/// to (0, 1].
pub fn fit_rb(lengths: &[f64], y: &[f64], se: &[f64]) -> Result<FitResult> {
    check_series(lengths, y, se, 4, "rb fit")?;
    let mut distinct = lengths.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::usage(format!(
            "rb fit: need at least 4 distinct sequence lengths, got {}",
            distinct.len()
        )));
    }
    let n = lengths.len();
    let c1_0 = y[n - 1];
    let mut c2_0 = y[0] - c1_0;
    if c2_0.abs() < 1e-9 {
        c2_0 = 1e-3;
    }
    let p0 = two_point_decay(lengths, y, c1_0).unwrap_or(0.99);

    let model = |p: &[f64], ni: f64| p[0] + p[1] * p[2].powf(ni);
    let residuals = |p: &[f64]| -> Vec<f64> {
        lengths.iter().zip(y).zip(se).map(|((ni, yi), si)| (model(p, *ni) - yi) / si).collect()
    };
    let opts = NllsOptions {
        bounds: Some(vec![(-2.0, 2.0), (-2.0, 2.0), (1e-9, 1.0)]),
        ..Default::default()
    };
    let outcome = nlls_minimize(residuals, &[c1_0, c2_0, p0], &opts)?;

    let mut flags = Vec::new();
    let mut degenerate = false;
    let c2 = outcome.parameters[1];
    let c2_sigma = outcome.uncertainties[1];
    // populations live on the unit interval, so a contrast below 1e-6 (or
    // below twice its own uncertainty) carries no decay information
    if !c2_sigma.is_finite() || c2.abs() < 2.0 * c2_sigma || c2.abs() < 1e-6 {
        flags.push("decay-unresolved".to_string());
        degenerate = true;
    }
    let mut result = FitResult::from_outcome("rb", vec!["c1", "c2", "p"], outcome, flags);
    if degenerate {
        result.converged = false;
    }
    Ok(result)
}

fn two_point_decay(lengths: &[f64], y: &[f64], c1: f64) -> Option<f64> {
    for i in 0..lengths.len() {
        for j in (i + 1)..lengths.len() {
            let (a, b) = (y[i] - c1, y[j] - c1);
            if a.abs() > 1e-9 && a * b > 0.0 && lengths[j] > lengths[i] {
                let ratio = b / a;
                if ratio > 0.0 && ratio < 1.0 {
                    let p = ratio.powf(1.0 / (lengths[j] - lengths[i]));
                    return Some(p.clamp(0.5, 0.999_999));
                }
            }
        }
    }
    None
}

/// Complex least squares on the hanger model
/// S21(f) = 1 - (Q_t/Q_e) / (1 + 2 i Q_t (f - f_r)/f_r), fitting
/// (f_r, Q_i, Q_e). Residuals stack the real and imaginary parts, weighted
/// by the per-quadrature noise sigma when given.
pub fn fit_hanger(
    f_ghz: &[f64],
    s21: &[C64],
    noise_sigma: Option<f64>,
) -> Result<FitResult> {
    if f_ghz.len() != s21.len() {
        return Err(Error::usage(format!(
            "hanger fit: {} frequencies vs {} responses",
            f_ghz.len(),
            s21.len()
        )));
    }
    if f_ghz.len() < 7 {
        return Err(Error::usage("hanger fit: need at least 7 points".to_string()));
    }
    let sigma = noise_sigma.unwrap_or(1.0);
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::usage("hanger fit: noise sigma must be positive".to_string()));
    }

    let mags: Vec<f64> = s21.iter().map(|v| v.norm()).collect();
    let (dip_idx, dip_mag) = mags
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, v)| (k, *v))
        .expect("nonempty data");
    let depth = 1.0 - dip_mag;
    if depth < 1e-3 {
        return Ok(FitResult {
            model: "hanger",
            parameter_names: vec!["f_r", "q_internal", "q_external"],
            parameters: vec![f64::NAN; 3],
            uncertainties: vec![f64::NAN; 3],
            residual_sum_squares: f64::NAN,
            iterations: 0,
            converged: false,
            flags: vec!["no-resonance".to_string()],
        });
    }
    let f_r0 = f_ghz[dip_idx];
    let fwhm = estimate_fwhm(f_ghz, &mags, dip_idx, dip_mag);
    let q_t0 = (f_r0 / fwhm).clamp(10.0, 1e8);
    let q_e0 = q_t0 / depth;
    let q_i0 = 1.0 / (1.0 / q_t0 - 1.0 / q_e0).max(1e-9);

    let span = f_ghz[f_ghz.len() - 1] - f_ghz[0];
    if span < 5.0 * fwhm {
        return Err(Error::usage(format!(
            "hanger fit: grid spans {span} GHz, less than 5 linewidths ({fwhm} GHz each)"
        )));
    }

    let model = |p: &[f64], fi: f64| -> C64 {
        let q_t = 1.0 / (1.0 / p[1] + 1.0 / p[2]);
        C64::new(1.0, 0.0)
            - C64::new(q_t / p[2], 0.0) / C64::new(1.0, 2.0 * q_t * (fi - p[0]) / p[0])
    };
    let residuals = |p: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * f_ghz.len());
        for (fi, di) in f_ghz.iter().zip(s21) {
            let diff = model(p, *fi) - di;
            out.push(diff.re / sigma);
            out.push(diff.im / sigma);
        }
        out
    };
    let opts = NllsOptions {
        bounds: Some(vec![
            (f_ghz[0], f_ghz[f_ghz.len() - 1]),
            (1.0, 1e9),
            (1.0, 1e9),
        ]),
        // the response varies on the linewidth scale f_r/Q, orders of
        // magnitude below f_r; with O(1) residuals the cube-root-of-eps
        // step balances truncation against round-off
        fd_scales: Some(vec![fwhm, q_i0, q_e0]),
        fd_rel_step: 6e-6,
        ..Default::default()
    };
    let outcome = nlls_minimize(residuals, &[f_r0, q_i0, q_e0], &opts)?;
    Ok(FitResult::from_outcome(
        "hanger",
        vec!["f_r", "q_internal", "q_external"],
        outcome,
        Vec::new(),
    ))
}

fn estimate_fwhm(f: &[f64], mags: &[f64], dip_idx: usize, dip_mag: f64) -> f64 {
    let half = 0.5 * (1.0 + dip_mag);
    let mut lo = f[0];
    for k in (0..dip_idx).rev() {
        if mags[k] > half {
            lo = f[k];
            break;
        }
    }
    let mut hi = f[f.len() - 1];
    for k in dip_idx..f.len() {
        if mags[k] > half {
            hi = f[k];
            break;
        }
    }
    (hi - lo).max(f64::EPSILON)
}

/// Benchmarking fidelities from the two decay fits.
#[derive(Debug, Clone, Serialize)]
pub struct RbFidelities {
    /// Reference depolarizing parameter p-bar and its 1 sigma.
    pub p_reference: f64,
    pub p_reference_sigma: f64,
    /// Interleaved-curve depolarizing parameter p_G and its 1 sigma.
    pub p_interleaved: f64,
    pub p_interleaved_sigma: f64,
    /// Average Clifford fidelity 1 - (1 - p)/2.
    pub avg_clifford_fidelity: f64,
    pub avg_clifford_fidelity_sigma: f64,
    /// Interleaved gate fidelity 1 - (1 - p_G/p)/2.
    pub gate_fidelity: f64,
    pub gate_fidelity_sigma: f64,
    pub warnings: Vec<String>,
}

/// Apply the fidelity relations to a converged reference/interleaved fit
/// pair, propagating uncertainties to first order (the two fits are
/// statistically independent, so no cross-covariance enters).
pub fn rb_fidelities(reference: &FitResult, interleaved: &FitResult) -> Result<RbFidelities> {
    if !reference.converged || !interleaved.converged {
        return Err(Error::fit(
            "both benchmarking fits must converge before extracting fidelities".to_string(),
        ));
    }
    let p_ref = reference.parameter("p")?;
    let sp_ref = reference.uncertainty("p")?;
    let p_int = interleaved.parameter("p")?;
    let sp_int = interleaved.uncertainty("p")?;

    let avg = 1.0 - (1.0 - p_ref) / 2.0;
    let avg_sigma = sp_ref / 2.0;
    let ratio = p_int / p_ref;
    let ratio_sigma =
        ratio.abs() * ((sp_int / p_int).powi(2) + (sp_ref / p_ref).powi(2)).sqrt();
    let gate = 1.0 - (1.0 - ratio) / 2.0;
    let gate_sigma = ratio_sigma / 2.0;

    let mut warnings = Vec::new();
    if p_int - p_ref > (sp_int.powi(2) + sp_ref.powi(2)).sqrt() {
        warnings.push(
            "interleaved decay is slower than the reference by more than 1 sigma \
             (nonphysical interleaved gain)"
                .to_string(),
        );
    }
    Ok(RbFidelities {
        p_reference: p_ref,
        p_reference_sigma: sp_ref,
        p_interleaved: p_int,
        p_interleaved_sigma: sp_int,
        avg_clifford_fidelity: avg,
        avg_clifford_fidelity_sigma: avg_sigma,
        gate_fidelity: gate,
        gate_fidelity_sigma: gate_sigma,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, StreamKey};
    use rand_distr::{Distribution, StandardNormal};

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    }

    fn uniform<R: rand::Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * rng.random::<f64>()
    }

    #[test]
    fn exponential_exact_recovery() {
        let x = linspace(0.0, 135_000.0, 21);
        let y: Vec<f64> = x.iter().map(|xi| 0.9 * (-xi / 27_000.0).exp() + 0.05).collect();
        let se = vec![0.005; x.len()];
        let fit = fit_exponential(&x, &y, &se).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!((fit.parameter("tau").unwrap() - 27_000.0).abs() < 1e-6 * 27_000.0);
        assert!((fit.parameter("amplitude").unwrap() - 0.9).abs() < 1e-6);
        assert!((fit.parameter("offset").unwrap() - 0.05).abs() < 1e-6);
    }

    #[test]
    fn exponential_constant_data_is_flagged() {
        let x = linspace(0.0, 100.0, 12);
        let y = vec![0.4; 12];
        let se = vec![0.01; 12];
        let fit = fit_exponential(&x, &y, &se).unwrap();
        assert!(!fit.converged);
        assert!(fit.flags.iter().any(|f| f.contains("amplitude") || f.contains("singular")));
    }

    #[test]
    fn ramsey_exact_recovery() {
        let x = linspace(0.0, 6_600.0, 61);
        let true_p = [0.45, 2_200.0, 0.0009, 0.4, 0.5];
        let y: Vec<f64> = x
            .iter()
            .map(|xi| {
                true_p[0]
                    * (-xi / true_p[1]).exp()
                    * (2.0 * std::f64::consts::PI * true_p[2] * xi + true_p[3]).cos()
                    + true_p[4]
            })
            .collect();
        let se = vec![0.005; x.len()];
        let fit = fit_ramsey(&x, &y, &se).unwrap();
        assert!(fit.converged, "{fit:?}");
        for (name, expected) in
            ["amplitude", "t2", "frequency", "phase", "offset"].iter().zip(true_p)
        {
            let got = fit.parameter(name).unwrap();
            assert!(
                (got - expected).abs() <= 1e-6 * expected.abs().max(1.0),
                "{name}: {got} vs {expected}"
            );
        }
        assert!(fit.flags.is_empty(), "{:?}", fit.flags);
    }

    #[test]
    fn ramsey_zero_detuning_is_frequency_unresolved() {
        let x = linspace(0.0, 6_600.0, 61);
        let y: Vec<f64> = x.iter().map(|xi| 0.45 * (-xi / 2_200.0).exp() + 0.5).collect();
        let se = vec![0.005; x.len()];
        let fit = fit_ramsey(&x, &y, &se).unwrap();
        assert!(
            fit.flags.iter().any(|f| f == "frequency-unresolved"),
            "flags: {:?}, f = {}",
            fit.flags,
            fit.parameter("frequency").unwrap()
        );
    }

    #[test]
    fn rb_exact_recovery() {
        let lengths: Vec<f64> = [1u64, 2, 4, 8, 16, 32, 64, 128, 256, 512]
            .iter()
            .map(|n| *n as f64)
            .collect();
        let y: Vec<f64> = lengths.iter().map(|n| 0.5 + 0.45 * 0.99f64.powf(*n)).collect();
        let se = vec![0.003; lengths.len()];
        let fit = fit_rb(&lengths, &y, &se).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!((fit.parameter("c1").unwrap() - 0.5).abs() < 1e-9);
        assert!((fit.parameter("c2").unwrap() - 0.45).abs() < 1e-9);
        assert!((fit.parameter("p").unwrap() - 0.99).abs() < 1e-9);
    }

    #[test]
    fn rb_flat_data_is_flagged() {
        let lengths: Vec<f64> = [1u64, 2, 4, 8, 16, 32].iter().map(|n| *n as f64).collect();
        let y = vec![0.5; 6];
        let se = vec![0.005; 6];
        let fit = fit_rb(&lengths, &y, &se).unwrap();
        assert!(!fit.converged);
        assert!(fit.flags.iter().any(|f| f.contains("decay") || f.contains("singular")));
    }

    #[test]
    fn hanger_exact_recovery() {
        let (f_r, q_i, q_e) = (6.868, 5.8e3, 12.9e3);
        let q_t = 1.0 / (1.0 / q_i + 1.0 / q_e);
        let width = f_r / q_t;
        let f = linspace(f_r - 10.0 * width, f_r + 10.0 * width, 201);
        let s21: Vec<C64> =
            f.iter().map(|fi| crate::readout::s21_hanger(*fi, f_r, q_i, q_e).unwrap()).collect();
        let fit = fit_hanger(&f, &s21, None).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!((fit.parameter("f_r").unwrap() - f_r).abs() < 1e-6 * f_r);
        assert!((fit.parameter("q_internal").unwrap() - q_i).abs() < 1e-6 * q_i);
        assert!((fit.parameter("q_external").unwrap() - q_e).abs() < 1e-6 * q_e);
    }

    #[test]
    fn hanger_flat_trace_is_flagged() {
        let f = linspace(6.0, 7.0, 101);
        let s21 = vec![C64::new(1.0, 0.0); 101];
        let fit = fit_hanger(&f, &s21, None).unwrap();
        assert!(!fit.converged);
        assert!(fit.flags.iter().any(|f| f == "no-resonance"));
    }

    #[test]
    fn rb_fidelity_algebra_is_exact() {
        let mk = |p: f64, sigma: f64| FitResult {
            model: "rb",
            parameter_names: vec!["c1", "c2", "p"],
            parameters: vec![0.5, 0.45, p],
            uncertainties: vec![0.01, 0.01, sigma],
            residual_sum_squares: 1.0,
            iterations: 5,
            converged: true,
            flags: vec![],
        };
        let fid = rb_fidelities(&mk(0.9904, 0.0005), &mk(0.9904 * 0.99, 0.0005)).unwrap();
        assert!((fid.avg_clifford_fidelity - 0.9952).abs() < 1e-12);
        assert!((fid.gate_fidelity - 0.995).abs() < 1e-12);
        assert!((fid.avg_clifford_fidelity_sigma - 0.00025).abs() < 1e-12);
        assert!(fid.warnings.is_empty());

        let fid = rb_fidelities(&mk(0.972, 0.0002), &mk(0.972, 0.0002)).unwrap();
        assert!((fid.avg_clifford_fidelity - 0.986).abs() < 1e-12);
        assert!((fid.gate_fidelity - 1.0).abs() < 1e-12);

        // nonphysical interleaved gain warns
        let fid = rb_fidelities(&mk(0.97, 0.0001), &mk(0.99, 0.0001)).unwrap();
        assert!(!fid.warnings.is_empty());

        // unconverged inputs are rejected
        let mut bad = mk(0.99, 0.001);
        bad.converged = false;
        assert!(rb_fidelities(&bad, &mk(0.99, 0.001)).is_err());
    }

    #[test]
    fn floor_se_guards_extreme_points() {
        let floored = floor_se(&[0.0, 0.01, 1e-9], &[10_000, 10_000, 100]);
        assert_eq!(floored[0], 1.0 / 20_000.0);
        assert_eq!(floored[1], 0.01);
        assert_eq!(floored[2], 1.0 / 200.0);
    }

    #[test]
    fn model_jacobians_match_independent_central_differences() {
        // the engine differences at 1e-6 relative step; re-difference at a
        // different step and require 1e-6 relative agreement
        let x = linspace(0.0, 20_000.0, 31);
        let se = vec![0.01; x.len()];
        let y = vec![0.5; x.len()];

        let check = |label: &str,
                     residuals: &dyn Fn(&[f64]) -> Vec<f64>,
                     p: &[f64],
                     scales: Option<&[f64]>,
                     step: f64| {
            let j1 = crate::analysis::jacobian(&residuals, p, step, scales);
            let j2 = crate::analysis::jacobian(&residuals, p, step / 3.0, scales);
            let vmax = j1.amax().max(j2.amax());
            for (idx, (a, b)) in j1.iter().zip(j2.iter()).enumerate() {
                assert!(
                    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()) + 1e-9 * vmax,
                    "{label} jacobian mismatch at flat index {idx}: {a} vs {b} (vmax {vmax})"
                );
            }
        };

        let exp_res = |p: &[f64]| -> Vec<f64> {
            x.iter()
                .zip(&y)
                .zip(&se)
                .map(|((xi, yi), si)| (p[0] * (-xi / p[1]).exp() + p[2] - yi) / si)
                .collect()
        };
        check("exponential", &exp_res, &[0.9, 8_000.0, 0.05], Some(&[1.0, 20_000.0, 1.0]), 3e-7);

        let ramsey_res = |p: &[f64]| -> Vec<f64> {
            x.iter()
                .zip(&y)
                .zip(&se)
                .map(|((xi, yi), si)| {
                    (p[0] * (-xi / p[1]).exp()
                        * (2.0 * std::f64::consts::PI * p[2] * xi + p[3]).cos()
                        + p[4]
                        - yi)
                        / si
                })
                .collect()
        };
        check("ramsey", &ramsey_res, &[0.45, 5_000.0, 0.0007, 0.2, 0.5], Some(&[1.0, 20_000.0, 7e-4, 1.0, 1.0]), 3e-7);

        let rb_res = |p: &[f64]| -> Vec<f64> {
            [1.0f64, 2.0, 4.0, 8.0, 16.0, 64.0, 256.0]
                .iter()
                .map(|ni| (p[0] + p[1] * p[2].powf(*ni) - 0.6) / 0.01)
                .collect()
        };
        check("rb", &rb_res, &[0.5, 0.45, 0.985], None, 3e-7);

        let f = linspace(6.8, 6.94, 41);
        let hanger_res = |p: &[f64]| -> Vec<f64> {
            let mut out = Vec::new();
            for fi in &f {
                let q_t = 1.0 / (1.0 / p[1] + 1.0 / p[2]);
                let m = C64::new(1.0, 0.0)
                    - C64::new(q_t / p[2], 0.0) / C64::new(1.0, 2.0 * q_t * (fi - p[0]) / p[0]);
                out.push(m.re);
                out.push(m.im);
            }
            out
        };
        check("hanger", &hanger_res, &[6.868, 5.8e3, 12.9e3], Some(&[0.0017, 5.8e3, 12.9e3]), 6e-6);
    }

    #[test]
    fn fit_recovery_calibration() {
        // parameters drawn from documented priors, gaussian noise at the
        // stated sigma, per-parameter recovery within 3 reported sigma in
        // at least 99% of cases
        let trials = 500;
        let mut checked = 0u64;
        let mut covered = 0u64;
        let mut by_family = std::collections::BTreeMap::<&str, (u64, u64)>::new();

        for trial in 0..trials {
            let mut rng = StreamKey::new(2024, domain::TEST, 100, trial).rng();

            // exponential: a in [0.5, 1], tau in [5e3, 5e4] ns, c in [0, 0.3]
            let (a, tau, c) = (
                uniform(&mut rng, 0.5, 1.0),
                uniform(&mut rng, 5e3, 5e4),
                uniform(&mut rng, 0.0, 0.3),
            );
            let x: Vec<f64> = (0..21).map(|k| 5.0 * tau * k as f64 / 20.0).collect();
            let sigma = 0.005;
            let y: Vec<f64> = x
                .iter()
                .map(|xi| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    a * (-xi / tau).exp() + c + sigma * noise
                })
                .collect();
            let se = vec![sigma; x.len()];
            let fit = fit_exponential(&x, &y, &se).unwrap();
            if fit.converged {
                let fam = by_family.entry("exponential").or_default();
                for (name, truth) in [("amplitude", a), ("tau", tau), ("offset", c)] {
                    checked += 1;
                    fam.0 += 1;
                    let err = (fit.parameter(name).unwrap() - truth).abs();
                    if err <= 3.0 * fit.uncertainty(name).unwrap() {
                        covered += 1;
                        fam.1 += 1;
                    }
                }
            }

            // rb: c1 in [0.45, 0.55], c2 in [0.35, 0.45], p in [0.97, 0.995]
            let (c1, c2, p) = (
                uniform(&mut rng, 0.45, 0.55),
                uniform(&mut rng, 0.35, 0.45),
                uniform(&mut rng, 0.97, 0.995),
            );
            let lengths: Vec<f64> =
                [1u64, 2, 4, 8, 16, 32, 64, 128, 256, 512].iter().map(|n| *n as f64).collect();
            let sigma = 0.004;
            let y: Vec<f64> = lengths
                .iter()
                .map(|ni| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    c1 + c2 * p.powf(*ni) + sigma * noise
                })
                .collect();
            let se = vec![sigma; lengths.len()];
            let fit = fit_rb(&lengths, &y, &se).unwrap();
            if fit.converged {
                let fam = by_family.entry("rb").or_default();
                for (name, truth) in [("c1", c1), ("c2", c2), ("p", p)] {
                    checked += 1;
                    fam.0 += 1;
                    let err = (fit.parameter(name).unwrap() - truth).abs();
                    if err <= 3.0 * fit.uncertainty(name).unwrap() {
                        covered += 1;
                        fam.1 += 1;
                    }
                }
            }
        }
        assert!(checked > 2 * trials, "too few converged fits: {checked}");
        let coverage = covered as f64 / checked as f64;
        assert!(
            coverage >= 0.99,
            "3-sigma coverage {coverage} below 0.99 ({covered}/{checked}); {by_family:?}"
        );
    }

    #[test]
    fn fit_recovery_calibration_ramsey_and_hanger() {
        let trials = 500;
        let mut checked = 0u64;
        let mut covered = 0u64;

        for trial in 0..trials {
            let mut rng = StreamKey::new(2025, domain::TEST, 101, trial).rng();

            // ramsey: a in [0.3, 0.5], t2 in [2e3, 1e4] ns, 3-8 fringes,
            // phase in [-1, 1], offset near 0.5
            let (a, t2) = (uniform(&mut rng, 0.3, 0.5), uniform(&mut rng, 2e3, 1e4));
            let span = 3.0 * t2;
            let freq = uniform(&mut rng, 3.0, 8.0) / span;
            let (phi, c) = (uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, 0.45, 0.55));
            let x: Vec<f64> = (0..61).map(|k| span * k as f64 / 60.0).collect();
            let sigma = 0.005;
            let y: Vec<f64> = x
                .iter()
                .map(|xi| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    a * (-xi / t2).exp() * (2.0 * std::f64::consts::PI * freq * xi + phi).cos()
                        + c
                        + sigma * noise
                })
                .collect();
            let se = vec![sigma; x.len()];
            let fit = fit_ramsey(&x, &y, &se).unwrap();
            if fit.converged {
                for (name, truth) in [
                    ("amplitude", a),
                    ("t2", t2),
                    ("frequency", freq),
                    ("phase", phi),
                    ("offset", c),
                ] {
                    checked += 1;
                    let err = (fit.parameter(name).unwrap() - truth).abs();
                    if err <= 3.0 * fit.uncertainty(name).unwrap() {
                        covered += 1;
                    }
                }
            }

            // hanger: f_r in [6.8, 7.2], Q_i in [5e3, 5e4], Q_e in [5e3, 2e4]
            let (f_r, q_i, q_e) = (
                uniform(&mut rng, 6.8, 7.2),
                uniform(&mut rng, 5e3, 5e4),
                uniform(&mut rng, 5e3, 2e4),
            );
            let q_t = 1.0 / (1.0 / q_i + 1.0 / q_e);
            let width = f_r / q_t;
            let f: Vec<f64> =
                (0..101).map(|k| f_r - 10.0 * width + 20.0 * width * k as f64 / 100.0).collect();
            let sigma = 0.01;
            let s21: Vec<C64> = f
                .iter()
                .map(|fi| {
                    let ni: f64 = StandardNormal.sample(&mut rng);
                    let nq: f64 = StandardNormal.sample(&mut rng);
                    crate::readout::s21_hanger(*fi, f_r, q_i, q_e).unwrap()
                        + C64::new(sigma * ni, sigma * nq)
                })
                .collect();
            let fit = fit_hanger(&f, &s21, Some(sigma)).unwrap();
            if fit.converged {
                for (name, truth) in
                    [("f_r", f_r), ("q_internal", q_i), ("q_external", q_e)]
                {
                    checked += 1;
                    let err = (fit.parameter(name).unwrap() - truth).abs();
                    if err <= 3.0 * fit.uncertainty(name).unwrap() {
                        covered += 1;
                    }
                }
            }
        }
        assert!(checked > 3 * trials, "too few converged fits: {checked}");
        let coverage = covered as f64 / checked as f64;
        assert!(
            coverage >= 0.99,
            "3-sigma coverage {coverage} below 0.99 ({covered}/{checked})"
        );
    }
}
