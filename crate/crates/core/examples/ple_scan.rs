//! One slow PLE sweep at a bias field, fitted with each lineshape.

use stark_emitter::fit::fit_peak;
use stark_emitter::simulate::{simulate_ple_scan, Emitter, NoiseModel, ScanConfig};
use stark_emitter::{Shape, StarkCoefficients};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let emitter = Emitter::lorentzian(StarkCoefficients::reference(), 60.0);
    let noise = NoiseModel::default();
    // at 150 MV/m the 2.5 s sweep outlasts the 50 ms noise correlation, so
    // the line wanders during the scan and no single shape fits exactly
    let f_dc = 150.0;
    let scan = ScanConfig {
        rng_seed: 7,
        ..ScanConfig::default()
    };
    let spectrum = simulate_ple_scan(&emitter, f_dc, &scan, &noise)?;
    println!(
        "{} bins, {:.0} counts, {:.1} ms per bin; line expected at {:.4} GHz",
        spectrum.len(),
        spectrum.total_counts(),
        1e3 * scan.dwell(),
        emitter.line_position(f_dc)
    );

    // coarse text plot
    let max = spectrum.counts.iter().cloned().fold(0.0, f64::max);
    for (f, n) in spectrum.frequencies.iter().zip(&spectrum.counts).step_by(8) {
        println!("{f:>9.4} {:>6.0} {}", n, "#".repeat((50.0 * n / max) as usize));
    }

    for shape in [Shape::Lorentzian, Shape::Gaussian, Shape::PseudoVoigt] {
        let fit = fit_peak(&spectrum, shape)?;
        println!(
            "{shape:?}: centre {:.5} ± {:.5} GHz  FWHM {:.1} ± {:.1} MHz  χ²/dof {:.2}",
            fit.center(),
            fit.center_sigma(),
            fit.fwhm(),
            fit.fwhm_sigma(),
            fit.fit.reduced_chi2()
        );
    }
    Ok(())
}
