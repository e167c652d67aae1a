//! Repeated fast sweeps under correlated field noise: per-scan widths,
//! centre wander, and the width of the summed line.

use stark_emitter::fit::{analyze_scan_series, fit_peak, linewidth_vs_scan_time};
use stark_emitter::simulate::{simulate_scan_series, Emitter, NoiseModel, ScanConfig};
use stark_emitter::{Shape, StarkCoefficients};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let emitter = Emitter::lorentzian(StarkCoefficients::reference(), 45.0);
    let scan = ScanConfig {
        rng_seed: 11,
        ..ScanConfig::fast(0.6, 120, 60.0, 2.0)
    };
    // a longer correlation time than the default keeps single sweeps clean
    let noise = NoiseModel { f_rms: 2.4, tau_c: 5.0 };
    for f_dc in [0.0, 250.0] {
        let series = simulate_scan_series(200, 0.1, &emitter, f_dc, &scan, &noise)?;
        let r = analyze_scan_series(&series)?;
        let summed = fit_peak(&series.summed_spectrum().expect("non-empty series"), Shape::Lorentzian)?;
        println!(
            "F = {f_dc:>5.0} MV/m: {} scans ({} failed)  mean FWHM {:.1} ± {:.1} MHz  centre std {:.1} MHz  \
             predicted {:.1} MHz  summed-line FWHM {:.1} MHz",
            r.n_scans,
            r.n_failed,
            r.mean_fwhm,
            r.fwhm_std,
            r.center_std,
            r.predicted_width,
            summed.fwhm()
        );
    }

    // default noise (50 ms): single-scan width grows with sweep duration
    let sweeps = linewidth_vs_scan_time(&emitter, &NoiseModel::default(), &scan, 250.0, &[0.005, 0.05, 0.5], 100)?;
    for s in sweeps {
        println!("scan time {:>6.3} s: mean FWHM {:.1} ± {:.1} MHz", s.scan_time, s.mean_fwhm, s.fwhm_std);
    }
    Ok(())
}
