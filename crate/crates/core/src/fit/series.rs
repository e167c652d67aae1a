use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::peak::fit_peak;
use super::FitError;
use crate::lineshape::{voigt_width_whiting, Shape, FWHM_PER_SIGMA};
use crate::simulate::{simulate_ple_scan, Emitter, NoiseModel, ScanConfig, SimError};
use crate::spectrum::{ScanSeries, Spectrum};

/// Fewest successful per-scan fits a diffusion report accepts.
pub const MIN_SUCCESSFUL_FITS: usize = 10;

/// Per-scan Lorentzian fit result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanFitRecord {
    pub index: usize,
    /// s.
    pub timestamp: f64,
    /// GHz.
    pub center: f64,
    pub center_sigma: f64,
    /// MHz.
    pub fwhm: f64,
    pub fwhm_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionReport {
    pub bias_field: f64,
    pub n_scans: usize,
    pub n_failed: usize,
    /// Mean per-scan FWHM, MHz.
    pub mean_fwhm: f64,
    pub fwhm_std: f64,
    /// Mean line centre, GHz.
    pub mean_center: f64,
    /// Standard deviation of per-scan centres, MHz.
    pub center_std: f64,
    /// Voigt width of the mean per-scan line broadened by the centre scatter,
    /// MHz.
    pub predicted_width: f64,
    pub scans: Vec<ScanFitRecord>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn lorentzian_fit(spectrum: &Spectrum) -> Option<(f64, f64, f64, f64)> {
    let fit = fit_peak(spectrum, Shape::Lorentzian).ok()?;
    let ok = fit.fit.converged && fit.fwhm().is_finite() && fit.fwhm() > 0.0;
    ok.then(|| (fit.center(), fit.center_sigma(), fit.fwhm(), fit.fwhm_sigma()))
}

/// Fits every scan with a Lorentzian and summarises linewidth and line
/// wander. Scans whose fit fails are dropped and counted in `n_failed`.
pub fn analyze_scan_series(series: &ScanSeries) -> Result<DiffusionReport, FitError> {
    let results: Vec<Option<ScanFitRecord>> = series
        .scans
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            lorentzian_fit(&s.spectrum).map(|(center, center_sigma, fwhm, fwhm_sigma)| ScanFitRecord {
                index,
                timestamp: s.timestamp,
                center,
                center_sigma,
                fwhm,
                fwhm_sigma,
            })
        })
        .collect();
    let scans: Vec<ScanFitRecord> = results.into_iter().flatten().collect();
    if scans.len() < MIN_SUCCESSFUL_FITS {
        return Err(FitError::TooFewFits {
            successful: scans.len(),
            required: MIN_SUCCESSFUL_FITS,
        });
    }
    let widths: Vec<f64> = scans.iter().map(|r| r.fwhm).collect();
    let centers: Vec<f64> = scans.iter().map(|r| r.center).collect();
    let (mean_fwhm, fwhm_std) = mean_std(&widths);
    let (mean_center, center_std_ghz) = mean_std(&centers);
    let center_std = center_std_ghz * 1e3;
    Ok(DiffusionReport {
        bias_field: series.bias_field,
        n_scans: series.len(),
        n_failed: series.len() - scans.len(),
        mean_fwhm,
        fwhm_std,
        mean_center,
        center_std,
        predicted_width: voigt_width_whiting(mean_fwhm, FWHM_PER_SIGMA * center_std),
        scans,
    })
}

/// Mean single-scan linewidth at one sweep duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanTimeSweep {
    /// s.
    pub scan_time: f64,
    /// MHz.
    pub mean_fwhm: f64,
    pub fwhm_std: f64,
    pub n_successful: usize,
}

/// Fewest scans simulated per sweep duration.
pub const MIN_SCANS_PER_TIME: usize = 100;

/// Simulates `n_scans` independent sweeps over the template's window for
/// each duration in `scan_times` and reports the mean Lorentzian FWHM.
///
/// The scan rate follows from the duration; count rates are rescaled so
/// the expected counts per bin match the template.
pub fn linewidth_vs_scan_time(
    emitter: &Emitter,
    noise: &NoiseModel,
    template: &ScanConfig,
    f_dc: f64,
    scan_times: &[f64],
    n_scans: usize,
) -> Result<Vec<ScanTimeSweep>, FitError> {
    if n_scans < MIN_SCANS_PER_TIME {
        return Err(FitError::InvalidInput(format!(
            "need at least {MIN_SCANS_PER_TIME} scans per duration, got {n_scans}"
        )));
    }
    template.validate()?;
    let template_dwell = template.dwell();
    scan_times
        .iter()
        .enumerate()
        .map(|(i, &scan_time)| {
            if !(scan_time > 0.0) || !scan_time.is_finite() {
                return Err(SimError::InvalidConfig(format!("scan time must be positive, got {scan_time}")).into());
            }
            let mut cfg = template.clone();
            cfg.scan_rate = cfg.span() / scan_time;
            let factor = template_dwell / cfg.dwell();
            cfg.peak_count_rate *= factor;
            cfg.background_rate *= factor;
            let base_seed = template
                .rng_seed
                .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let widths: Vec<f64> = (0..n_scans)
                .into_par_iter()
                .map(|k| {
                    let mut c = cfg.clone();
                    c.rng_seed = base_seed.wrapping_add(k as u64);
                    simulate_ple_scan(emitter, f_dc, &c, noise).map(|s| lorentzian_fit(&s).map(|r| r.2))
                })
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .flatten()
                .collect();
            if widths.len() < MIN_SUCCESSFUL_FITS {
                return Err(FitError::TooFewFits {
                    successful: widths.len(),
                    required: MIN_SUCCESSFUL_FITS,
                });
            }
            let (mean_fwhm, fwhm_std) = mean_std(&widths);
            Ok(ScanTimeSweep {
                scan_time,
                mean_fwhm,
                fwhm_std,
                n_successful: widths.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fit_peak;
    use crate::lineshape::LineshapeParams;
    use crate::simulate::simulate_scan_series;
    use crate::starkmodel::StarkCoefficients;

    fn fast_scan(seed: u64) -> ScanConfig {
        let mut s = ScanConfig::fast(0.5, 100, 60.0, 2.0);
        s.rng_seed = seed;
        s
    }

    #[test]
    fn quiet_series_has_small_scatter() {
        let e = Emitter::lorentzian(StarkCoefficients::reference(), 45.0);
        let series = simulate_scan_series(40, 0.01, &e, 0.0, &fast_scan(1), &NoiseModel::quiet()).unwrap();
        let r = analyze_scan_series(&series).unwrap();
        assert_eq!(r.n_failed, 0);
        let sigma_fit: f64 =
            r.scans.iter().map(|s| s.center_sigma).sum::<f64>() / r.scans.len() as f64 * 1e3;
        assert!(r.center_std < 3.0 * sigma_fit, "{} vs {}", r.center_std, sigma_fit);
        assert!((r.predicted_width / r.mean_fwhm - 1.0).abs() < 0.05);
        assert!((r.mean_fwhm / 45.0 - 1.0).abs() < 0.05, "{}", r.mean_fwhm);
    }

    #[test]
    fn predicted_width_matches_summed_spectrum() {
        // σ_G = 50 MHz from the noise at this field, Γ_L = 45 MHz
        let c = StarkCoefficients::reference();
        let f_dc = 150.0;
        let f_rms = 0.05 / c.slope(f_dc).abs();
        let noise = NoiseModel { f_rms, tau_c: 50e-3 };
        let e = Emitter::lorentzian(c, 45.0);
        let series = simulate_scan_series(200, 0.02, &e, f_dc, &fast_scan(7), &noise).unwrap();
        let r = analyze_scan_series(&series).unwrap();
        let sum = series.summed_spectrum().unwrap();
        let voigt = fit_peak(&sum, Shape::PseudoVoigt).unwrap();
        let rel = (r.predicted_width / voigt.params.voigt_fwhm() - 1.0).abs();
        assert!(rel < 0.15, "{} vs {}", r.predicted_width, voigt.params.voigt_fwhm());
        let expected = LineshapeParams {
            gamma_g: 50.0 * FWHM_PER_SIGMA,
            ..LineshapeParams::lorentzian(0.0, 45.0, 1.0, 0.0)
        };
        assert!((r.predicted_width / expected.voigt_fwhm() - 1.0).abs() < 0.2);
    }

    #[test]
    fn too_few_fits() {
        let e = Emitter::lorentzian(StarkCoefficients::reference(), 45.0);
        let series = simulate_scan_series(5, 0.0, &e, 0.0, &fast_scan(2), &NoiseModel::quiet()).unwrap();
        assert!(matches!(
            analyze_scan_series(&series),
            Err(FitError::TooFewFits { successful: 5, .. })
        ));
    }

    #[test]
    fn quiet_emitter_is_flat_in_scan_time() {
        let e = Emitter::lorentzian(StarkCoefficients::reference(), 45.0);
        let rows = linewidth_vs_scan_time(&e, &NoiseModel::quiet(), &fast_scan(3), 0.0, &[1.4e-4, 0.1, 2.3], 100)
            .unwrap();
        for r in &rows {
            assert!((r.mean_fwhm / 45.0 - 1.0).abs() < 0.04, "{r:?}");
        }
    }
}
