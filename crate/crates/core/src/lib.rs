//! Closed-loop transmon characterization toolkit: device parameter
//! relations, pulse-level Lindblad dynamics, dispersive readout statistics,
//! Clifford randomized benchmarking, experiment runners, and nonlinear
//! least-squares analysis.
//!
//! The pipeline is deterministic end to end: every random draw comes from
//! a stream keyed by `(seed, domain, sequence, shot)`, so identical
//! configurations produce bit-identical outputs at any parallelism.

pub mod analysis;
pub mod clifford;
pub mod config;
pub mod constants;
pub mod dataset;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod presets;
pub mod pulse;
pub mod readout;
pub mod rng;
pub mod signal;

pub use error::{Error, Result};
