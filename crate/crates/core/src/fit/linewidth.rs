use serde::{Deserialize, Serialize};

use super::lm::{least_squares_fit, DataPoint, FitResult, LmOptions, Model};
use super::FitError;
use crate::lineshape::{voigt_width_whiting, FWHM_PER_SIGMA};
use crate::starkmodel::{induced_dipole, StarkCoefficients};

/// Field noise and homogeneous width recovered from linewidth-vs-field data.
///
/// The fit runs in the noise variance `f_rms²` so that a vanishing noise
/// level stays well conditioned; `f_rms` is reported as `√max(s, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinewidthFit {
    /// MV/m.
    pub f_rms: f64,
    pub f_rms_sigma: f64,
    /// (MV/m)².
    pub f_rms_sq: f64,
    pub f_rms_sq_sigma: f64,
    /// MHz.
    pub gamma_l: f64,
    pub gamma_l_sigma: f64,
    pub fit: FitResult,
}

struct BroadeningModel {
    coeffs: StarkCoefficients,
}

impl Model for BroadeningModel {
    fn n_params(&self) -> usize {
        2
    }

    /// `[f_rms², Γ_L]` → `Γ_L/2 + √(Γ_L²/4 + 8 ln2 · s · (1e3 · dΔE/dF)²)`
    fn predict(&self, xs: &[f64], p: &[f64]) -> Option<Vec<f64>> {
        let (s, gl) = (p[0], p[1]);
        if !(gl >= 0.0) {
            return None;
        }
        let k = FWHM_PER_SIGMA * FWHM_PER_SIGMA;
        xs.iter()
            .map(|&f| {
                let d = induced_dipole(&self.coeffs, f) * 1e3;
                let arg = 0.25 * gl * gl + k * s * d * d;
                (arg >= 0.0).then(|| 0.5 * gl + arg.sqrt())
            })
            .collect()
    }
}

/// Fits field noise and homogeneous linewidth to `(F_DC, Γ, σ)` points with
/// the Stark coefficients held fixed.
pub fn fit_linewidth_vs_field(
    points: &[DataPoint],
    coeffs: &StarkCoefficients,
) -> Result<LinewidthFit, FitError> {
    if points.len() < 4 {
        return Err(FitError::InvalidInput(format!(
            "need at least 4 linewidth points, got {}",
            points.len()
        )));
    }
    let first = points[0].x;
    if points.iter().all(|p| p.x == first) {
        return Err(FitError::RankDeficient("all points share one field value".into()));
    }
    // Γ_L from the narrowest line; noise from the point with the largest slope
    let gl0 = points.iter().map(|p| p.y).fold(f64::MAX, f64::min).max(1e-3);
    let steep = points
        .iter()
        .max_by(|a, b| {
            induced_dipole(coeffs, a.x)
                .abs()
                .total_cmp(&induced_dipole(coeffs, b.x).abs())
        })
        .expect("non-empty");
    let d = induced_dipole(coeffs, steep.x).abs() * 1e3;
    let gamma_g = (steep.y * (steep.y - gl0)).max(0.0).sqrt();
    let s0 = if d > 0.0 {
        (gamma_g / FWHM_PER_SIGMA / d).powi(2)
    } else {
        0.0
    };
    let model = BroadeningModel { coeffs: *coeffs };
    let fit = least_squares_fit(&model, points, &[s0, gl0], &LmOptions::default())?;
    let sig = fit.sigmas();
    let s = fit.params[0];
    let f_rms = s.max(0.0).sqrt();
    // delta method away from zero; √σ_s bounds the amplitude otherwise
    let f_rms_sigma = if s > sig[0] {
        sig[0] / (2.0 * f_rms)
    } else {
        sig[0].sqrt()
    };
    Ok(LinewidthFit {
        f_rms,
        f_rms_sigma,
        f_rms_sq: s,
        f_rms_sq_sigma: sig[0],
        gamma_l: fit.params[1],
        gamma_l_sigma: sig[1],
        fit,
    })
}

/// Predicted curve for plotting: `(F, Γ)` at the fitted parameters.
pub fn linewidth_curve(fit: &LinewidthFit, coeffs: &StarkCoefficients, fields: &[f64]) -> Vec<(f64, f64)> {
    fields
        .iter()
        .map(|&f| {
            let sigma = induced_dipole(coeffs, f).abs() * 1e3 * fit.f_rms;
            (f, voigt_width_whiting(fit.gamma_l, FWHM_PER_SIGMA * sigma))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineshape::expected_linewidth;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fields() -> Vec<f64> {
        (0..21).map(|i| -200.0 + 20.0 * i as f64).collect()
    }

    #[test]
    fn noiseless_round_trip() {
        let c = StarkCoefficients::reference();
        let pts: Vec<DataPoint> = fields()
            .into_iter()
            .map(|f| DataPoint::new(f, expected_linewidth(60.0, 2.4, &c, f), 1.0))
            .collect();
        let fit = fit_linewidth_vs_field(&pts, &c).unwrap();
        assert!((fit.f_rms / 2.4 - 1.0).abs() < 1e-8, "{}", fit.f_rms);
        assert!((fit.gamma_l / 60.0 - 1.0).abs() < 1e-8, "{}", fit.gamma_l);
        let curve = linewidth_curve(&fit, &c, &[150.0]);
        assert!((curve[0].1 - expected_linewidth(60.0, 2.4, &c, 150.0)).abs() < 1e-6);
    }

    #[test]
    fn zero_noise_is_consistent_with_zero() {
        let c = StarkCoefficients::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<DataPoint> = fields()
            .into_iter()
            .map(|f| {
                let w = 60.0 * (1.0 + 0.05 * Normal::new(0.0, 1.0).unwrap().sample(&mut rng));
                DataPoint::new(f, w, 0.05 * w)
            })
            .collect();
        let fit = fit_linewidth_vs_field(&pts, &c).unwrap();
        assert!(fit.f_rms_sq.abs() < 2.0 * fit.f_rms_sq_sigma, "{} ± {}", fit.f_rms_sq, fit.f_rms_sq_sigma);
        assert!(fit.f_rms < 2.0 * fit.f_rms_sigma.max(1e-12) + 0.5);
    }

    #[test]
    fn degenerate_fields_rejected() {
        let c = StarkCoefficients::reference();
        let pts: Vec<DataPoint> = (0..6).map(|i| DataPoint::new(100.0, 60.0 + i as f64, 1.0)).collect();
        assert!(matches!(fit_linewidth_vs_field(&pts, &c), Err(FitError::RankDeficient(_))));
        assert!(fit_linewidth_vs_field(&pts[..3], &c).is_err());
    }
}
