use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Stationary Ornstein–Uhlenbeck field noise along the electrode axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// r.m.s. field amplitude, MV/m.
    pub f_rms: f64,
    /// Correlation time, s.
    pub tau_c: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            f_rms: 2.4,
            tau_c: 50e-3,
        }
    }
}

impl NoiseModel {
    pub fn quiet() -> Self {
        Self {
            f_rms: 0.0,
            tau_c: 50e-3,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.f_rms >= 0.0) || !self.f_rms.is_finite() {
            return Err(SimError::InvalidConfig(format!("f_rms must be >= 0, got {}", self.f_rms)));
        }
        if !(self.tau_c > 0.0) || !self.tau_c.is_finite() {
            return Err(SimError::InvalidConfig(format!("tau_c must be > 0, got {}", self.tau_c)));
        }
        Ok(())
    }
}

/// Exact-update OU sampler: `x ← x·e^{−dt/τ} + f_rms·√(1 − e^{−2dt/τ})·ξ`.
#[derive(Debug, Clone)]
pub struct OrnsteinUhlenbeck {
    model: NoiseModel,
    value: f64,
}

impl OrnsteinUhlenbeck {
    /// Starts from a draw of the stationary distribution.
    pub fn stationary<R: Rng + ?Sized>(model: NoiseModel, rng: &mut R) -> Self {
        let xi: f64 = rng.sample(StandardNormal);
        Self {
            model,
            value: model.f_rms * xi,
        }
    }

    pub fn starting_at(model: NoiseModel, value: f64) -> Self {
        Self { model, value }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> f64 {
        if self.model.f_rms == 0.0 {
            self.value = 0.0;
            return 0.0;
        }
        let decay = (-dt / self.model.tau_c).exp();
        let spread = self.model.f_rms * (-(-2.0 * dt / self.model.tau_c).exp_m1()).sqrt();
        let xi: f64 = rng.sample(StandardNormal);
        self.value = self.value * decay + spread * xi;
        self.value
    }
}
