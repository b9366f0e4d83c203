//! Two-phase cell cycle: size-marginal fixed point, lift, and stationarity.

use pdmp_kit::models::{build_cell_cycle, cell_cycle_lift, p1_invariant, CellCycleParams};
use pdmp_kit::semigroup::evolve;

fn main() -> pdmp_kit::Result<()> {
    let p = CellCycleParams::toy();
    let inv = p1_invariant(&p, 1e-12, 5000)?;
    println!("P1 fixed point: {} iterations, residual {:.2e}, uniqueness value {:.3}", inv.iterations, inv.residual, inv.uniqueness);

    let lift = cell_cycle_lift(&p, &inv.f1)?;
    println!("lift mass {:.8} (predicted {:.8})", lift.f_bar.total_mass(), lift.predicted_mass);

    let model = build_cell_cycle(&p)?;
    let f_bar = lift.f_bar.normalized()?;
    let g = evolve(&model, &f_bar, 1.0, 2.0 * model.numerics().quad_step)?;
    println!("evolve(f̄, 1) drift {:.3e}", g.l1_distance(&f_bar, model.grid()));
    Ok(())
}
