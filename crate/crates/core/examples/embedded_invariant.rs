//! Invariant density of the jump chain, its lift to the process, and back.

use pdmp_kit::embedded_chain::{invariant_of_k, k_stochasticity_defect, lift_invariant, project_invariant};
use pdmp_kit::models::{build_drift_redistribute, LineParams};
use pdmp_kit::{BoundaryDensity, DensityPair, GridDensity};

fn main() -> pdmp_kit::Result<()> {
    // Unit drift on (0,1), jumps at rate 1 and at the right end, uniform restart.
    let model = build_drift_redistribute(&LineParams { rate: 1.0, ..LineParams::drift_redistribute(200) })?;
    let init = DensityPair::new(
        GridDensity::from_fn(model.grid(), |_| 1.0),
        BoundaryDensity::zeros(model.atlas()),
    );
    println!("stochasticity defect of K: {:.2e}", k_stochasticity_defect(&model, &init)?);

    let inv = invariant_of_k(&model, &init, 1e-12, 1000)?;
    println!("K invariant after {} iterations, residual {:.2e}", inv.iterations, inv.residual);

    let lift = lift_invariant(&model, &inv.pair)?;
    let exact = |x: f64| (1.0 - (-x).exp()) / (-1.0f64).exp();
    for i in (0..200).step_by(25) {
        let x = model.grid().center(i).coords[0];
        println!("x={x:.3} f*={:.5} exact={:.5}", lift.f_star.values()[i], exact(x));
    }

    let back = project_invariant(&model, &lift.f_star)?;
    println!("round trip L1 error {:.2e}", back.l1_distance(&inv.pair, model.grid(), model.atlas()));
    Ok(())
}
