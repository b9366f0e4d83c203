//! Flow, cocycle and hazard laws plus the integral identities on each built-in model.

use pdmp_kit::models::{build_cell_cycle, build_kinetic_slab, constant_rate_jumper, drift_redistribute, free_flow, CellCycleParams, KineticSlabParams};
use pdmp_kit::verification::{change_of_variables, green_residual, law_suite, smooth_test_function, transport_image};
use pdmp_kit::GridDensity;

fn main() -> pdmp_kit::Result<()> {
    let models = [
        drift_redistribute(500),
        free_flow(500),
        constant_rate_jumper(1.0, 500),
        build_cell_cycle(&CellCycleParams::toy())?,
        build_kinetic_slab(&KineticSlabParams::two_speed(500))?,
    ];
    for m in &models {
        let laws = law_suite(m, 1000, 2.0, 1)?;
        let psi = smooth_test_function(m);
        let cov = change_of_variables(m, &psi)?;
        let h = 1e-5 * m.numerics().quad_step.min(1.0);
        let fg = GridDensity::from_fn(m.grid(), &psi);
        let tf = GridDensity::from_fn(m.grid(), |x| transport_image(m, &psi, x, h));
        let green = green_residual(m, &fg, &tf)?;
        println!(
            "{:<20} group {:.1e} cocycle {:.1e} hazard {:.1e} | change of variables {:.1e} | Green {:.1e}",
            m.name(),
            laws.group,
            laws.cocycle,
            laws.hazard,
            cov.relative_error,
            green.residual
        );
    }
    Ok(())
}
