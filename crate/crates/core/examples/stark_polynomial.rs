//! Quartic Stark response of the reference emitter, its physical
//! parameters, and a parity-symmetric level model showing why the linear
//! term vanishes.

use stark_emitter::starkmodel::{
    coeffs_to_physical, induced_dipole, lorentz_local_field, stark_shift, toy_exact_shift, toy_first_order_shift,
    toy_second_order_shift, StarkCoefficients, ToyHamiltonian, DIAMOND_EPSILON,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = StarkCoefficients::reference();
    let p = coeffs_to_physical(&c);
    println!("c1..c4 = {:?}", c.as_array());
    println!(
        "Δμ = {:.3e} D   Δα = {:.4} Å³ (Δα/2 = {:.4})   Δβ = {:.3e}   Δγ = {:.3e}",
        p.delta_mu,
        p.delta_alpha,
        p.delta_alpha_half(),
        p.delta_beta,
        p.delta_gamma
    );

    println!("\n{:>8} {:>12} {:>16}", "F MV/m", "ΔE GHz", "dΔE/dF GHz/(MV/m)");
    for f in [-250.0, -150.0, -50.0, 0.0, 50.0, 150.0, 250.0] {
        println!("{f:>8.0} {:>12.5} {:>16.3e}", stark_shift(&c, f), induced_dipole(&c, f));
    }

    let local = lorentz_local_field(100.0, DIAMOND_EPSILON)?;
    println!("\n100 MV/m applied in diamond -> {local:.2} MV/m at the emitter");

    // ground doublet below an excited doublet, dipoles only between parities
    let h = ToyHamiltonian::centrosymmetric_default();
    println!("\nlevel  first-order  second-order(100)  exact(100)  exact(-100)");
    for level in 0..h.dim() {
        println!(
            "{level:>5}  {:>11.2e}  {:>17.6e}  {:>10.6e}  {:>11.6e}",
            toy_first_order_shift(&h, level)?,
            toy_second_order_shift(&h, level, 100.0)?,
            toy_exact_shift(&h, level, 100.0)?,
            toy_exact_shift(&h, level, -100.0)?
        );
    }

    let broken = h.with_diagonal_dipole(2, 0.05);
    let slope = (toy_exact_shift(&broken, 2, 1e-3)? - toy_exact_shift(&broken, 2, -1e-3)?) / 2e-3;
    println!("\nwith a 0.05 D permanent dipole on level 2 the slope at F = 0 is {slope:.4e} GHz/(MV/m)");
    Ok(())
}
