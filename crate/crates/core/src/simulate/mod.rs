//! Forward models: PLE sweeps with field noise, repeated fast-scan series,
//! and photon correlations from the optical Bloch equations.

pub mod bloch;
pub mod noise;
pub mod scan;

use thiserror::Error;

use crate::lineshape::LineshapeError;

pub use bloch::{
    excited_population, g2_ideal, lifetime_limit, poisson_g2, simulate_g2, BackgroundModel,
    TwoLevelParams,
};
pub use noise::{NoiseModel, OrnsteinUhlenbeck};
pub use scan::{
    simulate_ple_scan, simulate_ple_scan_with, simulate_scan_series, Emitter, ScanConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("integration step {step_ns} ns is infeasible over {span_ns} ns")]
    StepSizeInfeasible { step_ns: f64, span_ns: f64 },
    #[error(transparent)]
    Lineshape(#[from] LineshapeError),
}
