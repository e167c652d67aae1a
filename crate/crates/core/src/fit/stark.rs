use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lm::{least_squares_fit, DataPoint, FitResult, LmOptions, Polynomial};
use super::FitError;
use crate::starkmodel::{coeffs_to_physical, PhysicalStarkParams, StarkCoefficients, K_MU, K_VOLUME};

/// Field values are divided by this before fitting.
pub const FIELD_SCALE: f64 = 100.0;

/// Measured line centre at one local field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkPoint {
    /// MV/m.
    pub field: f64,
    /// GHz.
    pub center: f64,
    /// GHz.
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StarkFitOptions {
    /// Weight points by their centre uncertainty.
    pub weighted: bool,
    pub lm: LmOptions,
    /// Case-resampling bootstrap refits on top of the covariance errors;
    /// 0 disables it.
    #[serde(default)]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub bootstrap_seed: u64,
}

impl Default for StarkFitOptions {
    fn default() -> Self {
        Self {
            weighted: true,
            lm: LmOptions::default(),
            bootstrap_resamples: 0,
            bootstrap_seed: 0,
        }
    }
}

/// Spread of the coefficients over bootstrap refits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkBootstrap {
    pub resamples: usize,
    /// Resamples whose refit succeeded; the rest are skipped.
    pub successful: usize,
    pub coeff_sigmas: StarkCoefficients,
    pub offset_sigma: f64,
}

/// Unit labels carried by reports. Only the defaults are understood by the
/// conversions in this crate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Units {
    pub field: String,
    pub frequency: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            field: "MV/m".into(),
            frequency: "GHz".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkFitReport {
    #[serde(default)]
    pub units: Units,
    pub order: usize,
    pub coeffs: StarkCoefficients,
    pub coeff_sigmas: StarkCoefficients,
    /// Absolute line position at zero field, GHz.
    pub offset: f64,
    pub offset_sigma: f64,
    pub physical: PhysicalStarkParams,
    pub physical_sigmas: PhysicalStarkParams,
    /// Largest share of the cubic and quartic terms in the fitted shift over
    /// the measured fields.
    pub higher_order_fraction: f64,
    pub field_range: (f64, f64),
    pub fit: FitResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<StarkBootstrap>,
}

/// `max |c3F³ + c4F⁴| / |ΔE(F)|` over the nonzero fields.
pub fn higher_order_fraction(coeffs: &StarkCoefficients, fields: &[f64]) -> f64 {
    fields
        .iter()
        .filter(|f| **f != 0.0)
        .filter_map(|&f| {
            let total = coeffs.shift(f);
            let high = coeffs.c3 * f.powi(3) + coeffs.c4 * f.powi(4);
            (total != 0.0).then(|| (high / total).abs())
        })
        .fold(0.0, f64::max)
}

/// Fits `centre(F) = offset + Σ_{k≤order} c_k F^k` to line positions.
pub fn fit_stark_trajectory(
    points: &[StarkPoint],
    order: usize,
    options: &StarkFitOptions,
) -> Result<StarkFitReport, FitError> {
    if !(1..=4).contains(&order) {
        return Err(FitError::InvalidInput(format!("polynomial order must be 1..=4, got {order}")));
    }
    if points.len() < order + 2 {
        return Err(FitError::InvalidInput(format!(
            "order {order} needs at least {} points, got {}",
            order + 2,
            points.len()
        )));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.field).collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < order + 1 {
        return Err(FitError::RankDeficient(format!(
            "{} distinct field values cannot fix an order-{order} polynomial",
            distinct.len()
        )));
    }
    let data: Vec<DataPoint> = points
        .iter()
        .map(|p| {
            DataPoint::new(
                p.field / FIELD_SCALE,
                p.center,
                if options.weighted { p.sigma } else { 1.0 },
            )
        })
        .collect();
    let mut init = vec![0.0; order + 1];
    init[0] = points.iter().map(|p| p.center).sum::<f64>() / points.len() as f64;
    let fit = least_squares_fit(&Polynomial { degree: order }, &data, &init, &options.lm)?;
    let sig = fit.sigmas();
    let mut c = [0.0; 4];
    let mut s = [0.0; 4];
    for k in 1..=order {
        let scale = FIELD_SCALE.powi(k as i32);
        c[k - 1] = fit.params[k] / scale;
        s[k - 1] = sig[k] / scale;
    }
    let coeffs = StarkCoefficients::from_array(c);
    let coeff_sigmas = StarkCoefficients::from_array(s);
    let fields: Vec<f64> = points.iter().map(|p| p.field).collect();
    let physical = coeffs_to_physical(&coeffs);
    let physical_sigmas = PhysicalStarkParams {
        delta_mu: s[0] * K_MU,
        delta_alpha: 2.0 * s[1] * K_VOLUME,
        delta_beta: 6.0 * s[2] * K_VOLUME,
        delta_gamma: 24.0 * s[3] * K_VOLUME,
    };
    Ok(StarkFitReport {
        units: Units::default(),
        order,
        coeffs,
        coeff_sigmas,
        offset: fit.params[0],
        offset_sigma: sig[0],
        physical,
        physical_sigmas,
        higher_order_fraction: higher_order_fraction(&coeffs, &fields),
        field_range: (distinct[0], distinct[distinct.len() - 1]),
        fit,
        bootstrap: (options.bootstrap_resamples > 0).then(|| bootstrap(points, order, options)),
    })
}

fn bootstrap(points: &[StarkPoint], order: usize, options: &StarkFitOptions) -> StarkBootstrap {
    let single = StarkFitOptions {
        bootstrap_resamples: 0,
        ..options.clone()
    };
    let fits: Vec<([f64; 4], f64)> = (0..options.bootstrap_resamples as u64)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.bootstrap_seed.wrapping_add(b));
            let sample: Vec<StarkPoint> = (0..points.len())
                .map(|_| points[rng.random_range(0..points.len())])
                .collect();
            let r = fit_stark_trajectory(&sample, order, &single).ok()?;
            Some((r.coeffs.as_array(), r.offset))
        })
        .collect();
    let std = |v: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = v.collect();
        let n = v.len() as f64;
        if v.len() < 2 {
            return f64::NAN;
        }
        let mean = v.iter().sum::<f64>() / n;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let mut sig = [0.0; 4];
    for (k, s) in sig.iter_mut().enumerate().take(order) {
        *s = std(&mut fits.iter().map(|f| f.0[k]));
    }
    StarkBootstrap {
        resamples: options.bootstrap_resamples,
        successful: fits.len(),
        coeff_sigmas: StarkCoefficients::from_array(sig),
        offset_sigma: std(&mut fits.iter().map(|f| f.1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn points(coeffs: &StarkCoefficients, max_field: f64, n: usize, offset: f64) -> Vec<StarkPoint> {
        (0..n)
            .map(|i| {
                let f = -max_field + 2.0 * max_field * i as f64 / (n - 1) as f64;
                StarkPoint {
                    field: f,
                    center: offset + coeffs.shift(f),
                    sigma: 0.005,
                }
            })
            .collect()
    }

    #[test]
    fn exact_quartic_recovery() {
        let truth = StarkCoefficients::reference();
        let r = fit_stark_trajectory(&points(&truth, 250.0, 26, 0.0), 4, &StarkFitOptions::default()).unwrap();
        for (a, b) in r.coeffs.as_array().iter().zip(truth.as_array()) {
            assert_relative_eq!(*a, b, max_relative = 1e-8);
        }
        assert!(r.offset.abs() < 1e-10);
    }

    #[test]
    fn quadratic_regime_at_low_field() {
        let r0 = StarkCoefficients::reference();
        let truth = StarkCoefficients::new(r0.c1, r0.c2, 0.0, 0.0);
        let r = fit_stark_trajectory(&points(&truth, 50.0, 21, 0.0), 2, &StarkFitOptions::default()).unwrap();
        assert_relative_eq!(r.coeffs.c1, truth.c1, max_relative = 1e-9);
        assert_relative_eq!(r.coeffs.c2, truth.c2, max_relative = 1e-9);
        assert_eq!(r.higher_order_fraction, 0.0);
    }

    #[test]
    fn offset_equivariance() {
        let truth = StarkCoefficients::reference();
        let opts = StarkFitOptions::default();
        let a = fit_stark_trajectory(&points(&truth, 250.0, 26, 0.0), 4, &opts).unwrap();
        let b = fit_stark_trajectory(&points(&truth, 250.0, 26, 123.4), 4, &opts).unwrap();
        for (x, y) in a.coeffs.as_array().iter().zip(b.coeffs.as_array()) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-12), "{x} {y}");
        }
        assert_relative_eq!(b.offset - a.offset, 123.4, max_relative = 1e-10);
    }

    #[test]
    fn higher_order_fraction_values() {
        let c = StarkCoefficients::reference();
        // at 200 MV/m: cubic+quartic −0.792, total −2.71
        let f200 = higher_order_fraction(&c, &[-200.0, 0.0, 100.0, 200.0]);
        let expected = (c.c3 * 8e6 + c.c4 * 1.6e9) / c.shift(200.0);
        assert_relative_eq!(f200, expected, max_relative = 1e-12);
        assert!((0.28..0.30).contains(&f200), "{f200}");
        assert_eq!(higher_order_fraction(&c, &[0.0]), 0.0);
    }

    #[test]
    fn rank_and_count_errors() {
        let same: Vec<StarkPoint> = (0..8)
            .map(|i| StarkPoint {
                field: 10.0,
                center: i as f64,
                sigma: 1.0,
            })
            .collect();
        assert!(matches!(
            fit_stark_trajectory(&same, 2, &StarkFitOptions::default()),
            Err(FitError::RankDeficient(_))
        ));
        let few = &points(&StarkCoefficients::reference(), 100.0, 5, 0.0)[..5];
        assert!(fit_stark_trajectory(few, 4, &StarkFitOptions::default()).is_err());
    }

    #[test]
    fn bootstrap_spread_matches_covariance() {
        use rand_distr::{Distribution, Normal};
        let c = StarkCoefficients::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 0.005).unwrap();
        let mut pts = points(&c, 250.0, 51, 0.0);
        for p in &mut pts {
            p.center += noise.sample(&mut rng);
        }
        let opts = StarkFitOptions {
            bootstrap_resamples: 400,
            bootstrap_seed: 9,
            ..StarkFitOptions::default()
        };
        let r = fit_stark_trajectory(&pts, 4, &opts).unwrap();
        let b = r.bootstrap.clone().unwrap();
        assert_eq!(b.successful, 400);
        for (bs, cs) in b.coeff_sigmas.as_array().iter().zip(r.coeff_sigmas.as_array()) {
            assert!((0.6..1.6).contains(&(bs / cs)), "{bs:e} vs {cs:e}");
        }
        assert_eq!(fit_stark_trajectory(&pts, 4, &opts).unwrap().bootstrap, Some(b));
        assert!(fit_stark_trajectory(&pts, 4, &StarkFitOptions::default()).unwrap().bootstrap.is_none());
    }
}
