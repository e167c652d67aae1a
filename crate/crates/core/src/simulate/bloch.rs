//! Resonantly driven two-level optical Bloch equations and the photon
//! correlation they imply.
//!
//! Bloch vector `(v, w)` on resonance, with `w = ρee − ρgg`:
//!
//! ```text
//! dv/dt = −v/T2 + Ω w
//! dw/dt = −(w + 1)/T1 − Ω v
//! ```
//!
//! The in-phase component decouples and stays zero from the ground state.
//! After a photon detection the emitter is in the ground state, so
//! `g²(τ) = ρee(τ) / ρee(∞)` for the trajectory started there.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::SimError;

/// How uncorrelated background light dilutes the measured correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundModel {
    /// `1 − ρ²(1 − g²)` with ρ the signal purity.
    #[default]
    PuritySquared,
    /// `1 − ρ(1 − g²)`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelParams {
    /// Population lifetime, ns.
    pub t1: f64,
    /// Coherence time, ns (≤ 2·t1).
    pub t2: f64,
    /// Rabi frequency, MHz (cycles per µs).
    pub rabi: f64,
    /// Fraction of detected light coming from the emitter.
    pub signal_purity: f64,
    #[serde(default)]
    pub background: BackgroundModel,
}

impl Default for TwoLevelParams {
    fn default() -> Self {
        Self {
            t1: 6.0,
            t2: 4.0,
            rabi: 200.0,
            signal_purity: 0.985,
            background: BackgroundModel::PuritySquared,
        }
    }
}

/// Largest number of RK4 steps a single curve may take.
const MAX_STEPS: f64 = 5e7;

impl TwoLevelParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.t1 > 0.0
            && self.t2 > 0.0
            && self.t2 <= 2.0 * self.t1 * (1.0 + 1e-12)
            && self.rabi > 0.0
            && self.rabi.is_finite()
            && (0.0..=1.0).contains(&self.signal_purity);
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(format!(
                "two-level parameters need t1 > 0, 0 < t2 <= 2 t1, rabi > 0, purity in [0, 1]: {self:?}"
            )))
        }
    }

    /// Angular Rabi frequency, rad/ns.
    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.rabi * 1e-3
    }

    /// Integration step, ns.
    pub fn step(&self) -> f64 {
        let period = 1e3 / self.rabi;
        self.t2.min(period) / 50.0
    }

    /// Steady-state excited population `Ω² / (2(Ω² + 1/(T1 T2)))`.
    pub fn steady_state_excited(&self) -> f64 {
        let om2 = self.omega().powi(2);
        om2 / (2.0 * (om2 + 1.0 / (self.t1 * self.t2)))
    }

    /// Decay rate of the Rabi envelope, 1/ns.
    pub fn envelope_rate(&self) -> f64 {
        0.5 / self.t1 + 0.5 / self.t2
    }

    fn dilute(&self, ideal: f64) -> f64 {
        let weight = match self.background {
            BackgroundModel::PuritySquared => self.signal_purity * self.signal_purity,
            BackgroundModel::Linear => self.signal_purity,
        };
        1.0 - weight * (1.0 - ideal)
    }
}

/// Excited-state population on `tau_grid` (ns) starting from the ground
/// state, by fixed-step RK4 with step `p.step()` (or `step` if given).
pub fn excited_population(
    p: &TwoLevelParams,
    tau_grid: &[f64],
    step: Option<f64>,
) -> Result<Vec<f64>, SimError> {
    p.validate()?;
    if tau_grid.iter().any(|t| !(*t >= 0.0)) || tau_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(SimError::InvalidConfig("tau grid must be sorted and >= 0".into()));
    }
    let h = step.unwrap_or_else(|| p.step());
    let span = tau_grid.last().copied().unwrap_or(0.0);
    if !(h > 0.0) || !h.is_finite() || span / h > MAX_STEPS {
        return Err(SimError::StepSizeInfeasible { step_ns: h, span_ns: span });
    }
    let g1 = 1.0 / p.t1;
    let g2 = 1.0 / p.t2;
    let om = p.omega();
    let rhs = |v: f64, w: f64| (-g2 * v + om * w, -g1 * (w + 1.0) - om * v);

    let (mut v, mut w) = (0.0, -1.0);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(tau_grid.len());
    for &target in tau_grid {
        let interval = target - t;
        if interval > 0.0 {
            let n = (interval / h).ceil().max(1.0) as usize;
            let dt = interval / n as f64;
            for _ in 0..n {
                let (k1v, k1w) = rhs(v, w);
                let (k2v, k2w) = rhs(v + 0.5 * dt * k1v, w + 0.5 * dt * k1w);
                let (k3v, k3w) = rhs(v + 0.5 * dt * k2v, w + 0.5 * dt * k2w);
                let (k4v, k4w) = rhs(v + dt * k3v, w + dt * k3w);
                v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
                w += dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
            }
            t = target;
        }
        out.push(0.5 * (1.0 + w));
    }
    Ok(out)
}

/// Ideal `g²(τ)` of the emitter alone.
pub fn g2_ideal(p: &TwoLevelParams, tau_grid: &[f64]) -> Result<Vec<f64>, SimError> {
    let pss = p.steady_state_excited();
    Ok(excited_population(p, tau_grid, None)?
        .into_iter()
        .map(|pe| pe / pss)
        .collect())
}

/// Measured `g²(τ)` including background dilution.
pub fn simulate_g2(p: &TwoLevelParams, tau_grid: &[f64]) -> Result<Vec<f64>, SimError> {
    Ok(g2_ideal(p, tau_grid)?
        .into_iter()
        .map(|g| p.dilute(g))
        .collect())
}

/// Coincidence-histogram noise: each point becomes `Poisson(n·g²)/n` with
/// `n` the coincidences per unit correlation. Returns `(g², σ)` pairs.
pub fn poisson_g2<R: Rng + ?Sized>(curve: &[f64], coincidences: f64, rng: &mut R) -> Vec<(f64, f64)> {
    curve
        .iter()
        .map(|&g| {
            let mean = (coincidences * g).max(0.0);
            let k = if mean > 0.0 {
                Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(mean)
            } else {
                0.0
            };
            (k / coincidences, k.max(1.0).sqrt() / coincidences)
        })
        .collect()
}

/// Lifetime-limited linewidth `1/(2π T1)` in MHz for `t1` in ns.
pub fn lifetime_limit(t1: f64) -> f64 {
    1e3 / (2.0 * std::f64::consts::PI * t1)
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn excited_population_is_a_probability(t1 in 0.5..20.0f64, ratio in 0.05..2.0f64, rabi in 0.0..500.0f64) {
            let p = TwoLevelParams { t1, t2: ratio * t1, rabi, ..Default::default() };
            let tau: Vec<f64> = (0..200).map(|i| 0.25 * i as f64).collect();
            for pe in excited_population(&p, &tau, None).unwrap() {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&pe), "{pe}");
            }
        }
    }
}
