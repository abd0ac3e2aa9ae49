//! Nonlinear least-squares fitting of the five measurement model families
//! and the benchmarking fidelity algebra.

mod models;
mod nlls;

pub use models::{
    fit_exponential, fit_hanger, fit_ramsey, fit_rb, floor_se, rb_fidelities, FitResult,
    RbFidelities,
};
pub use nlls::{nlls_minimize, NllsOptions, NllsOutcome};

#[cfg(test)]
pub(crate) use nlls::jacobian;
