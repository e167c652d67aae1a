//! Least-squares engine and the inference pipelines built on it.

pub mod g2;
pub mod linewidth;
pub mod lm;
pub mod peak;
pub mod series;
pub mod stark;

use thiserror::Error;

use crate::simulate::SimError;

pub use g2::{fit_g2, G2Curve, G2Fit, G2FitOptions};
pub use linewidth::{fit_linewidth_vs_field, LinewidthFit};
pub use lm::{least_squares_fit, numeric_jacobian, DataPoint, FitResult, LmOptions, Model, PointModel, Polynomial};
pub use peak::{fit_peak, PeakFit};
pub use series::{analyze_scan_series, linewidth_vs_scan_time, DiffusionReport, ScanTimeSweep};
pub use stark::{fit_stark_trajectory, StarkFitOptions, StarkFitReport, StarkPoint, Units};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid fit input: {0}")]
    InvalidInput(String),
    #[error("singular normal equations (condition number {condition:e})")]
    Singular { condition: f64 },
    #[error("rank-deficient data: {0}")]
    RankDeficient(String),
    #[error("no significant peak: height {height:.3} below threshold {threshold:.3}")]
    NoSignificantPeak { height: f64, threshold: f64 },
    #[error("only {successful} successful scan fits, need {required}")]
    TooFewFits { successful: usize, required: usize },
    #[error(transparent)]
    Simulation(#[from] SimError),
}
