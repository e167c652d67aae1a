//! Potential and field of the default electrode pair, grid convergence,
//! and the bias-to-local-field table.

use std::time::Instant;

use stark_emitter::fieldmap::{solve_potential, ElectrodeGeometry, SolverOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let geom = ElectrodeGeometry::default();
    let mut fine = None;
    for h in [0.019, 0.015] {
        let t = Instant::now();
        let map = solve_potential(&geom, &SolverOptions::default().with_spacing(h))?;
        let (fx, fy) = map.emitter_field()?;
        println!(
            "h = {h:.3} µm  grid {}x{}  {} iterations  F = ({fx:.4}, {fy:.1e}) MV/m  local {:.3} MV/m  [{:.1?}]",
            map.nx(),
            map.ny(),
            map.iterations,
            map.local_field()?,
            t.elapsed()
        );
        fine = Some(map);
    }

    // one solve serves every bias
    let map = fine.unwrap();
    println!("\n{:>8} {:>14} {:>14}", "bias V", "external MV/m", "local MV/m");
    for v in [-300.0, -200.0, -100.0, 0.0, 100.0, 200.0, 300.0] {
        let m = map.scaled_to(v);
        println!("{v:>8.0} {:>14.3} {:>14.3}", m.emitter_field()?.0, m.local_field()?);
    }

    println!("\npotential along the surface (y = 0):");
    for x in [-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0] {
        let i = map.x.partition_point(|a| *a < x).min(map.nx() - 1);
        let j = map.y.partition_point(|b| *b < 0.0).min(map.ny() - 1);
        println!("  x = {:>6.3} µm  V = {:>8.3}", map.x[i], map.potential_at_node(i, j));
    }
    Ok(())
}
