//! Observed linewidth versus bias field when slow field noise rides on the
//! Stark slope.

use stark_emitter::lineshape::{expected_linewidth, noise_gaussian_width, voigt_width_whiting};
use stark_emitter::StarkCoefficients;

fn main() {
    let c = StarkCoefficients::reference();
    let gamma_l = 60.0;
    println!("Γ_L = {gamma_l} MHz; Voigt width of 60 MHz Lorentzian + 60 MHz Gaussian: {:.2} MHz\n", voigt_width_whiting(60.0, 60.0));
    println!("{:>8} {:>14} {:>14} {:>14}", "F MV/m", "Γ_G (1 MV/m)", "Γ (1 MV/m)", "Γ (2.4 MV/m)");
    for i in 0..=10 {
        let f = -250.0 + 50.0 * i as f64;
        println!(
            "{f:>8.0} {:>14.2} {:>14.2} {:>14.2}",
            noise_gaussian_width(1.0, &c, f),
            expected_linewidth(gamma_l, 1.0, &c, f),
            expected_linewidth(gamma_l, 2.4, &c, f)
        );
    }
}
