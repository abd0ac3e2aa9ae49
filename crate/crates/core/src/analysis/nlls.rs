//! Damped Gauss-Newton (Levenberg-Marquardt) minimization of weighted
//! residual vectors with numerically differenced Jacobians.
//!
//! The engine is model-agnostic: callers hand in a closure producing the
//! weighted residual vector and an initial point. Parameter uncertainties
//! come from the Jacobian-based covariance at the optimum, scaled by the
//! residual variance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NllsOptions {
    pub max_iterations: usize,
    /// Relative cost-change convergence threshold.
    pub cost_rel_tol: f64,
    /// Gradient infinity-norm convergence threshold.
    pub grad_tol: f64,
    /// Relative finite-difference step for the Jacobian.
    pub fd_rel_step: f64,
    /// Characteristic scale of each parameter, setting its difference step
    /// to `fd_rel_step * scale`. Defaults to `max(|p|, 1)`, which is wrong
    /// for parameters like fringe frequencies whose natural scale is far
    /// from unity.
    pub fd_scales: Option<Vec<f64>>,
    /// Per-parameter box constraints; trial steps are clamped inside.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for NllsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            cost_rel_tol: 1e-12,
            grad_tol: 1e-10,
            fd_rel_step: 3e-7,
            fd_scales: None,
            bounds: None,
        }
    }
}

/// Raw minimizer output; model-level wrappers turn this into a
/// [`crate::analysis::FitResult`].
#[derive(Debug, Clone)]
pub struct NllsOutcome {
    pub parameters: Vec<f64>,
    /// 1-sigma uncertainties, NaN where the information matrix is singular.
    pub uncertainties: Vec<f64>,
    pub covariance: Option<DMatrix<f64>>,
    /// Weighted residual sum of squares at the optimum.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub singular: bool,
}

/// Central-difference Jacobian of the residual vector.
pub(crate) fn jacobian<F>(
    residuals: &F,
    p: &[f64],
    fd_rel_step: f64,
    fd_scales: Option<&[f64]>,
) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = residuals(p).len();
    let n = p.len();
    let mut j = DMatrix::zeros(m, n);
    let mut work = p.to_vec();
    for col in 0..n {
        let scale = match fd_scales {
            Some(s) => s[col],
            None => p[col].abs().max(1.0),
        };
        let h = fd_rel_step * scale;
        work[col] = p[col] + h;
        let plus = residuals(&work);
        work[col] = p[col] - h;
        let minus = residuals(&work);
        work[col] = p[col];
        for row in 0..m {
            j[(row, col)] = (plus[row] - minus[row]) / (2.0 * h);
        }
    }
    j
}

fn clamp_to_bounds(p: &mut [f64], bounds: &Option<Vec<(f64, f64)>>) {
    if let Some(b) = bounds {
        for (v, (lo, hi)) in p.iter_mut().zip(b) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// Minimize the sum of squared residuals starting from `p0`.
pub fn nlls_minimize<F>(residuals: F, p0: &[f64], opts: &NllsOptions) -> Result<NllsOutcome>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if p0.is_empty() {
        return Err(Error::usage("cannot fit zero parameters".to_string()));
    }
    if let Some(b) = &opts.bounds {
        if b.len() != p0.len() {
            return Err(Error::usage(format!(
                "{} bounds for {} parameters",
                b.len(),
                p0.len()
            )));
        }
    }
    if let Some(s) = &opts.fd_scales {
        if s.len() != p0.len() || s.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(Error::usage(
                "fd_scales must be positive and one per parameter".to_string(),
            ));
        }
    }
    let mut p = p0.to_vec();
    clamp_to_bounds(&mut p, &opts.bounds);
    let n = p.len();
    let r0 = residuals(&p);
    let m = r0.len();
    if m < n {
        return Err(Error::usage(format!("{m} residuals cannot constrain {n} parameters")));
    }
    if r0.iter().any(|v| !v.is_finite()) {
        return Err(Error::fit("residuals are not finite at the initial point".to_string()));
    }

    let mut r = DVector::from_vec(r0);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        let j = jacobian(&residuals, &p, opts.fd_rel_step, opts.fd_scales.as_deref());
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * &r;
        if g.amax() < opts.grad_tol {
            // the detection pass takes no step and is not counted
            converged = true;
            break;
        }
        iterations += 1;

        let mut step_accepted = false;
        while lambda < 1e15 {
            let mut damped = a.clone();
            for k in 0..n {
                // Marquardt scaling keeps the damping meaningful for wildly
                // different parameter magnitudes
                damped[(k, k)] += lambda * a[(k, k)].max(1e-12);
            }
            let delta = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match damped.lu().solve(&(-&g)) {
                    Some(d) => d,
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                },
            };
            let mut p_try: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            clamp_to_bounds(&mut p_try, &opts.bounds);
            let r_try = DVector::from_vec(residuals(&p_try));
            let cost_try = r_try.norm_squared();
            if cost_try.is_finite() && cost_try < cost {
                let rel_change = (cost - cost_try) / cost.max(1e-300);
                p = p_try;
                r = r_try;
                cost = cost_try;
                lambda = (lambda * 0.1).max(1e-12);
                step_accepted = true;
                if rel_change < opts.cost_rel_tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !step_accepted {
            // no direction decreases the cost: either we are at a minimum
            // (small gradient caught next pass) or the problem is flagged
            if !step_accepted {
                let j = jacobian(&residuals, &p, opts.fd_rel_step, opts.fd_scales.as_deref());
                converged = (j.transpose() * &r).amax() < opts.grad_tol.max(1e-6 * cost.sqrt());
            }
            break;
        }
    }

    // covariance at the optimum, scaled by the residual variance. The
    // scale is floored at one: with properly weighted residuals a reduced
    // chi-square below one is a small-dof fluctuation, and deflating the
    // uncertainties by it would break their 3-sigma coverage.
    let j = jacobian(&residuals, &p, opts.fd_rel_step, opts.fd_scales.as_deref());
    let a = j.transpose() * &j;
    let dof = m.saturating_sub(n);
    let scale = if dof > 0 { (cost / dof as f64).max(1.0) } else { 1.0 };
    let (covariance, uncertainties, singular) = match a.clone().try_inverse() {
        Some(inv) => {
            let cov = inv * scale;
            let sig: Vec<f64> = (0..n).map(|k| cov[(k, k)].max(0.0).sqrt()).collect();
            (Some(cov), sig, false)
        }
        None => (None, vec![f64::NAN; n], true),
    };

    Ok(NllsOutcome {
        parameters: p,
        uncertainties,
        covariance,
        cost,
        iterations,
        converged,
        singular,
    })
}
