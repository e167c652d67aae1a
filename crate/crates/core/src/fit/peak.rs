use serde::{Deserialize, Serialize};

use super::lm::{least_squares_fit, DataPoint, FitResult, LmOptions, Model};
use super::FitError;
use crate::lineshape::{
    decompose_pseudo_voigt, unit_gaussian, unit_lorentzian, unit_pseudo_voigt, LineshapeParams, Shape,
};
use crate::spectrum::Spectrum;

/// Fitted peak with its raw least-squares result.
///
/// Fit parameters are `[centre GHz, FWHM GHz, amplitude, background]`, with
/// the Lorentzian weight inserted after the FWHM for pseudo-Voigt fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub shape: Shape,
    pub params: LineshapeParams,
    pub fit: FitResult,
}

impl PeakFit {
    pub fn center(&self) -> f64 {
        self.params.center
    }

    pub fn center_sigma(&self) -> f64 {
        self.fit.sigmas()[0]
    }

    /// Fitted FWHM in MHz.
    pub fn fwhm(&self) -> f64 {
        self.fit.params[1] * 1e3
    }

    pub fn fwhm_sigma(&self) -> f64 {
        self.fit.sigmas()[1] * 1e3
    }
}

struct PeakModel {
    shape: Shape,
}

impl Model for PeakModel {
    fn n_params(&self) -> usize {
        match self.shape {
            Shape::PseudoVoigt => 5,
            _ => 4,
        }
    }

    fn predict(&self, xs: &[f64], p: &[f64]) -> Option<Vec<f64>> {
        let (c, w) = (p[0], p[1]);
        if !(w > 0.0) {
            return None;
        }
        let (eta, amp, bg) = match self.shape {
            Shape::PseudoVoigt => (p[2], p[3], p[4]),
            Shape::Lorentzian => (1.0, p[2], p[3]),
            Shape::Gaussian => (0.0, p[2], p[3]),
        };
        if !(0.0..=1.0).contains(&eta) || amp < 0.0 || bg < 0.0 {
            return None;
        }
        Some(
            xs.iter()
                .map(|&x| {
                    let prof = match self.shape {
                        Shape::Lorentzian => unit_lorentzian(x - c, w),
                        Shape::Gaussian => unit_gaussian(x - c, w),
                        Shape::PseudoVoigt => unit_pseudo_voigt(x - c, w, eta),
                    };
                    bg + amp * prof
                })
                .collect(),
        )
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Moment-based starting point: `(centre, fwhm, amplitude, background)`.
fn initial_guess(s: &Spectrum) -> (f64, f64, f64, f64) {
    let baseline = median(&s.counts);
    let n = s.len();
    // lightly smoothed maximum
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            s.counts[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let imax = (0..n).max_by(|&a, &b| smooth[a].total_cmp(&smooth[b])).unwrap_or(0);
    let height = (smooth[imax] - baseline).max(0.0);
    let cut = 0.25 * height;
    let mut lo = imax;
    while lo > 0 && smooth[lo - 1] - baseline > cut {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < n && smooth[hi + 1] - baseline > cut {
        hi += 1;
    }
    let (mut sw, mut swx) = (0.0, 0.0);
    for i in lo..=hi {
        let w = (s.counts[i] - baseline).max(0.0);
        sw += w;
        swx += w * s.frequencies[i];
    }
    let centre = if sw > 0.0 { swx / sw } else { s.frequencies[imax] };
    let mut swxx = 0.0;
    for i in lo..=hi {
        let w = (s.counts[i] - baseline).max(0.0);
        swxx += w * (s.frequencies[i] - centre).powi(2);
    }
    let bin = s.bin_width().abs();
    let span = (s.frequencies[n - 1] - s.frequencies[0]).abs();
    let second_moment = if sw > 0.0 { (swxx / sw).sqrt() * 2.354_820_045 } else { 0.0 };
    // the truncated window underestimates the width of long-tailed lines
    let extent = (hi - lo + 1) as f64 * bin * 0.6;
    let fwhm = second_moment.max(extent).clamp(2.0 * bin, 0.5 * span);
    let amplitude = (s.counts[imax].max(smooth[imax]) - baseline).max(1e-12);
    (centre, fwhm, amplitude, baseline.max(0.0))
}

/// Starts a pseudo-Voigt fit from the better of the two limiting shapes,
/// slightly inside the mixing range.
fn pseudo_voigt_start(spectrum: &Spectrum, options: &LmOptions) -> Option<Vec<f64>> {
    [(Shape::Lorentzian, 0.95), (Shape::Gaussian, 0.05)]
        .into_iter()
        .filter_map(|(shape, eta)| {
            let f = fit_peak_with(spectrum, shape, options).ok()?;
            let p = &f.fit.params;
            Some((f.fit.chi2, vec![p[0], p[1], eta, p[2], p[3]]))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, init)| init)
}

const REWEIGHT_PASSES: usize = 2;
/// Variance floor for empty bins.
const MIN_VARIANCE: f64 = 0.25;

/// Fits one peak to a binned spectrum with Poisson weights: `√max(n, 1)`
/// to start, then the square root of the fitted model.
pub fn fit_peak(spectrum: &Spectrum, shape: Shape) -> Result<PeakFit, FitError> {
    fit_peak_with(spectrum, shape, &LmOptions::default())
}

pub fn fit_peak_with(spectrum: &Spectrum, shape: Shape, options: &LmOptions) -> Result<PeakFit, FitError> {
    if spectrum.len() < 8 {
        return Err(FitError::InvalidInput(format!(
            "need at least 8 bins, got {}",
            spectrum.len()
        )));
    }
    if spectrum.counts.iter().any(|c| !(*c >= 0.0)) {
        return Err(FitError::InvalidInput("counts must be finite and non-negative".into()));
    }
    let baseline = median(&spectrum.counts);
    let peak = spectrum.counts.iter().cloned().fold(f64::MIN, f64::max);
    let threshold = 3.0 * baseline.max(1.0).sqrt();
    if peak - baseline < threshold {
        return Err(FitError::NoSignificantPeak {
            height: peak - baseline,
            threshold,
        });
    }
    let (c0, w0, a0, b0) = initial_guess(spectrum);
    let data: Vec<DataPoint> = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.counts)
        .map(|(&f, &n)| DataPoint::new(f, n, n.max(1.0).sqrt()))
        .collect();
    let model = PeakModel { shape };
    let init = match shape {
        Shape::PseudoVoigt => pseudo_voigt_start(spectrum, options).unwrap_or_else(|| vec![c0, w0, 0.5, a0, b0]),
        _ => vec![c0, w0, a0, b0],
    };
    let mut fit = least_squares_fit(&model, &data, &init, options)?;
    // Weights from the data bias low-count fits; refit with weights from
    // the fitted model instead.
    for _ in 0..REWEIGHT_PASSES {
        let Some(pred) = model.predict(&spectrum.frequencies, &fit.params) else {
            break;
        };
        let reweighted: Vec<DataPoint> = data
            .iter()
            .zip(&pred)
            .map(|(d, m)| DataPoint::new(d.x, d.y, m.max(MIN_VARIANCE).sqrt()))
            .collect();
        match least_squares_fit(&model, &reweighted, &fit.params, options) {
            Ok(f) => fit = f,
            Err(_) => break,
        }
    }
    let p = &fit.params;
    let params = match shape {
        Shape::Lorentzian => LineshapeParams::lorentzian(p[0], p[1] * 1e3, p[2], p[3]),
        Shape::Gaussian => LineshapeParams::gaussian(p[0], p[1] * 1e3, p[2], p[3]),
        Shape::PseudoVoigt => {
            let (gamma_l, gamma_g) = decompose_pseudo_voigt(p[1] * 1e3, p[2]);
            LineshapeParams {
                center: p[0],
                gamma_l,
                gamma_g,
                eta: p[2],
                amplitude: p[3],
                background: p[4],
            }
        }
    };
    Ok(PeakFit { shape, params, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineshape::{gaussian, lorentzian, pseudo_voigt};
    use approx::assert_relative_eq;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn noiseless_lorentzian_recovered() {
        let truth = LineshapeParams::lorentzian(0.0213, 47.0, 300.0, 12.0);
        let f = grid(-0.3, 0.3, 121);
        let counts = f.iter().map(|&x| lorentzian(x, &truth).unwrap()).collect();
        let fit = fit_peak(&Spectrum::new(f, counts), Shape::Lorentzian).unwrap();
        assert!(fit.fit.converged);
        assert_relative_eq!(fit.fwhm(), 47.0, max_relative = 1e-6);
        assert_relative_eq!(fit.center(), 0.0213, max_relative = 1e-6);
        assert_relative_eq!(fit.params.amplitude, 300.0, max_relative = 1e-6);
    }

    #[test]
    fn noiseless_gaussian_and_pseudo_voigt() {
        let f = grid(-0.5, 0.5, 200);
        let g = LineshapeParams::gaussian(-0.05, 90.0, 80.0, 3.0);
        let counts = f.iter().map(|&x| gaussian(x, &g).unwrap()).collect();
        let fit = fit_peak(&Spectrum::new(f.clone(), counts), Shape::Gaussian).unwrap();
        assert_relative_eq!(fit.fwhm(), 90.0, max_relative = 1e-6);

        let pv = LineshapeParams {
            center: 0.02,
            gamma_l: 45.0,
            gamma_g: 60.0,
            eta: 0.6,
            amplitude: 150.0,
            background: 4.0,
        };
        let counts = f.iter().map(|&x| pseudo_voigt(x, &pv).unwrap()).collect();
        let fit = fit_peak(&Spectrum::new(f, counts), Shape::PseudoVoigt).unwrap();
        assert_relative_eq!(fit.fwhm(), pv.voigt_fwhm(), max_relative = 1e-6);
        assert_relative_eq!(fit.params.eta, 0.6, max_relative = 1e-6);
        assert_relative_eq!(fit.params.voigt_fwhm(), pv.voigt_fwhm(), max_relative = 1e-6);
    }

    #[test]
    fn flat_background_is_rejected() {
        let f = grid(-0.3, 0.3, 64);
        let counts = vec![20.0; 64];
        assert!(matches!(
            fit_peak(&Spectrum::new(f, counts), Shape::Lorentzian),
            Err(FitError::NoSignificantPeak { .. })
        ));
    }

    #[test]
    fn too_few_bins() {
        let s = Spectrum::new(vec![0.0, 1.0, 2.0], vec![1.0, 5.0, 1.0]);
        assert!(matches!(fit_peak(&s, Shape::Lorentzian), Err(FitError::InvalidInput(_))));
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::lineshape::lorentzian;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn noiseless_lorentzian_round_trip(
            center in -0.1..0.1f64,
            fwhm in 20.0..150.0f64,
            amplitude in 50.0..5000.0f64,
            background in 0.0..50.0f64,
        ) {
            let truth = LineshapeParams::lorentzian(center, fwhm, amplitude, background);
            let f: Vec<f64> = (0..161).map(|i| -0.4 + 0.005 * i as f64).collect();
            let counts = f.iter().map(|&x| lorentzian(x, &truth).unwrap()).collect();
            let fit = fit_peak(&Spectrum::new(f, counts), Shape::Lorentzian).unwrap();
            prop_assert!((fit.center() - center).abs() < 1e-6 * fwhm * 1e-3);
            prop_assert!((fit.fwhm() / fwhm - 1.0).abs() < 1e-6);
            prop_assert!((fit.params.amplitude / amplitude - 1.0).abs() < 1e-6);
        }
    }
}
