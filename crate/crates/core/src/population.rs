//! Statistics over many emitters: per-emitter dipole and polarizability
//! from Stark fits, plus a generator for synthetic populations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{StarkFitReport, StarkPoint, Units};
use crate::starkmodel::{physical_to_coeffs, PhysicalStarkParams, StarkCoefficients};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopulationError {
    #[error("no emitters given")]
    Empty,
    #[error("emitter {emitter} uses field {field} and frequency {frequency}; expected MV/m and GHz")]
    MixedUnits {
        emitter: String,
        field: String,
        frequency: String,
    },
    #[error("invalid population model: {0}")]
    InvalidModel(String),
}

/// One row of the population table. Δα is given both as the full
/// polarizability difference and as half of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRow {
    pub emitter: String,
    pub delta_mu_debye: f64,
    pub delta_mu_sigma_debye: f64,
    pub delta_alpha_a3: f64,
    pub delta_alpha_sigma_a3: f64,
    pub delta_alpha_half_a3: f64,
    pub delta_alpha_half_sigma_a3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Sample standard deviation; zero for one emitter.
    pub std: f64,
    /// Standard error of the mean.
    pub sem: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            sem: std / n.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub n_emitters: usize,
    pub delta_mu_debye: Moments,
    pub delta_alpha_a3: Moments,
    pub delta_alpha_half_a3: Moments,
}

/// Tabulates Δμ and Δα from per-emitter Stark fits and summarises them.
pub fn summarize_population(
    reports: &[(String, StarkFitReport)],
) -> Result<(Vec<PopulationRow>, PopulationSummary), PopulationError> {
    if reports.is_empty() {
        return Err(PopulationError::Empty);
    }
    let canonical = Units::default();
    if let Some((id, r)) = reports.iter().find(|(_, r)| r.units != canonical) {
        return Err(PopulationError::MixedUnits {
            emitter: id.clone(),
            field: r.units.field.clone(),
            frequency: r.units.frequency.clone(),
        });
    }
    let rows: Vec<PopulationRow> = reports
        .iter()
        .map(|(id, r)| PopulationRow {
            emitter: id.clone(),
            delta_mu_debye: r.physical.delta_mu,
            delta_mu_sigma_debye: r.physical_sigmas.delta_mu,
            delta_alpha_a3: r.physical.delta_alpha,
            delta_alpha_sigma_a3: r.physical_sigmas.delta_alpha,
            delta_alpha_half_a3: r.physical.delta_alpha_half(),
            delta_alpha_half_sigma_a3: 0.5 * r.physical_sigmas.delta_alpha,
        })
        .collect();
    let col = |f: fn(&PopulationRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let summary = PopulationSummary {
        n_emitters: rows.len(),
        delta_mu_debye: Moments::of(&col(|r| r.delta_mu_debye)),
        delta_alpha_a3: Moments::of(&col(|r| r.delta_alpha_a3)),
        delta_alpha_half_a3: Moments::of(&col(|r| r.delta_alpha_half_a3)),
    };
    Ok((rows, summary))
}

/// Synthetic population: Δμ uniform in `±delta_mu_max`, Δα/2 normal
/// around `delta_alpha_half_mean`, shared higher-order coefficients, and
/// line centres with Gaussian scatter on a common field grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationModel {
    pub n_emitters: usize,
    /// D.
    pub delta_mu_max: f64,
    /// Å³.
    pub delta_alpha_half_mean: f64,
    pub delta_alpha_half_std: f64,
    pub c3: f64,
    pub c4: f64,
    /// MV/m.
    pub fields: Vec<f64>,
    /// GHz.
    pub center_sigma: f64,
    pub seed: u64,
}

impl Default for PopulationModel {
    fn default() -> Self {
        let r = StarkCoefficients::reference();
        Self {
            n_emitters: 11,
            delta_mu_max: 1e-3,
            delta_alpha_half_mean: 0.23,
            delta_alpha_half_std: 0.05,
            c3: r.c3,
            c4: r.c4,
            fields: (0..26).map(|i| -250.0 + 20.0 * i as f64).collect(),
            center_sigma: 0.005,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedEmitter {
    pub id: String,
    pub coeffs: StarkCoefficients,
    pub physical: PhysicalStarkParams,
    pub points: Vec<StarkPoint>,
}

pub fn simulate_population(model: &PopulationModel) -> Result<Vec<SimulatedEmitter>, PopulationError> {
    if model.n_emitters == 0 {
        return Err(PopulationError::Empty);
    }
    if !(model.delta_mu_max >= 0.0) || !(model.delta_alpha_half_std >= 0.0) || !(model.center_sigma > 0.0) {
        return Err(PopulationError::InvalidModel(
            "spreads must be >= 0 and the centre scatter > 0".into(),
        ));
    }
    if model.fields.len() < 6 {
        return Err(PopulationError::InvalidModel("need at least 6 field values".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let alpha = Normal::new(model.delta_alpha_half_mean, model.delta_alpha_half_std)
        .map_err(|e| PopulationError::InvalidModel(e.to_string()))?;
    let scatter = Normal::new(0.0, model.center_sigma).map_err(|e| PopulationError::InvalidModel(e.to_string()))?;
    Ok((0..model.n_emitters)
        .map(|k| {
            let delta_mu = if model.delta_mu_max > 0.0 {
                rng.random_range(-model.delta_mu_max..=model.delta_mu_max)
            } else {
                0.0
            };
            let half = alpha.sample(&mut rng);
            let base = physical_to_coeffs(&PhysicalStarkParams {
                delta_mu,
                delta_alpha: 2.0 * half,
                delta_beta: 0.0,
                delta_gamma: 0.0,
            });
            let coeffs = StarkCoefficients::new(base.c1, base.c2, model.c3, model.c4);
            let points = model
                .fields
                .iter()
                .map(|&f| StarkPoint {
                    field: f,
                    center: coeffs.shift(f) + scatter.sample(&mut rng),
                    sigma: model.center_sigma,
                })
                .collect();
            SimulatedEmitter {
                id: format!("E{:02}", k + 1),
                coeffs,
                physical: crate::starkmodel::coeffs_to_physical(&coeffs),
                points,
            }
        })
        .collect())
}
