//! Resolvent by the Neumann series, its mass, and duality with simulation.

use pdmp_kit::models::drift_redistribute;
use pdmp_kit::semigroup::resolvent_g;
use pdmp_kit::verification::resolvent_duality;
use pdmp_kit::{GridDensity, StatePoint};

fn main() -> pdmp_kit::Result<()> {
    let model = drift_redistribute(200);
    let f = GridDensity::from_fn(model.grid(), |x| 2.0 * x.coords[0]);
    for lambda in [0.1, 1.0, 10.0, 1000.0] {
        let r = resolvent_g(&model, &f, lambda, 1e-12, 100_000)?;
        let g = r.density.scaled(lambda);
        println!(
            "λ={lambda:>6}: λ‖R f‖ = {:.8}, ‖λR f − f‖ = {:.3e}, {} terms",
            g.total_mass(),
            g.l1_distance(&f, model.grid()),
            r.terms
        );
    }
    let psi = |x: &StatePoint| x.coords[0];
    let d = resolvent_duality(&model, &f, &psi, 1.0, 100_000, 7)?;
    println!("duality: quadrature {:.6}, simulation {:.6} ± {:.1e}, agree {}", d.lhs, d.rhs, d.std_error, d.agree);
    Ok(())
}
