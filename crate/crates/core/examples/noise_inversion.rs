//! Recovers the field-noise amplitude and homogeneous linewidth from
//! linewidths measured across the bias range.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use stark_emitter::fit::{fit_linewidth_vs_field, DataPoint};
use stark_emitter::lineshape::expected_linewidth;
use stark_emitter::StarkCoefficients;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = StarkCoefficients::reference();
    let (gamma_l, f_rms) = (60.0, 2.4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scatter = Normal::new(0.0, 0.05)?;
    let points: Vec<DataPoint> = (0..21)
        .map(|i| {
            let f = -200.0 + 20.0 * i as f64;
            let w = expected_linewidth(gamma_l, f_rms, &c, f);
            DataPoint::new(f, w * (1.0 + scatter.sample(&mut rng)), 0.05 * w)
        })
        .collect();
    let fit = fit_linewidth_vs_field(&points, &c)?;
    println!("F_rms = {:.3} ± {:.3} MV/m   (true {f_rms})", fit.f_rms, fit.f_rms_sigma);
    println!("Γ_L   = {:.2} ± {:.2} MHz    (true {gamma_l})", fit.gamma_l, fit.gamma_l_sigma);
    println!("χ²/dof = {:.2}", fit.fit.reduced_chi2());
    Ok(())
}
