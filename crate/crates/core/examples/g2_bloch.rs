//! Photon antibunching from the two-level Bloch equations, and T1/T2
//! recovered from noisy curves at two drive powers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stark_emitter::fit::{fit_g2, G2Curve, G2FitOptions};
use stark_emitter::simulate::{g2_ideal, lifetime_limit, poisson_g2, simulate_g2, TwoLevelParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = TwoLevelParams::default();
    let tau: Vec<f64> = (0..201).map(|i| 0.25 * i as f64).collect();
    let ideal = g2_ideal(&truth, &tau)?;
    let measured = simulate_g2(&truth, &tau)?;
    println!("lifetime-limited linewidth for T1 = {} ns: {:.1} MHz", truth.t1, lifetime_limit(truth.t1));
    for i in (0..=40).step_by(4) {
        println!("τ = {:>5.2} ns  g² ideal {:.4}  with background {:.4}", tau[i], ideal[i], measured[i]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let curves: Vec<G2Curve> = [1.0, 0.01]
        .into_iter()
        .map(|power: f64| {
            let p = TwoLevelParams {
                rabi: truth.rabi * power.sqrt(),
                ..truth
            };
            let (g, s): (Vec<f64>, Vec<f64>) = poisson_g2(&simulate_g2(&p, &tau)?, 500.0, &mut rng).into_iter().unzip();
            Ok(G2Curve::new(tau.clone(), g, s).with_power(power))
        })
        .collect::<Result<_, stark_emitter::simulate::SimError>>()?;
    let init = TwoLevelParams {
        t1: 7.0,
        t2: 3.5,
        rabi: 190.0,
        signal_purity: 0.95,
        ..truth
    };
    let fit = fit_g2(&curves, &init, &G2FitOptions::default())?;
    let [s1, s2, sr, sp] = fit.sigmas;
    println!(
        "\njoint fit: T1 = {:.2} ± {s1:.2} ns  T2 = {:.2} ± {s2:.2} ns  Ω = {:.0} ± {sr:.0} MHz  purity {:.4} ± {sp:.4}",
        fit.params.t1, fit.params.t2, fit.params.rabi, fit.params.signal_purity
    );
    Ok(())
}
