//! Forward evolution of a density by transport and jump splitting.

use pdmp_kit::models::drift_redistribute;
use pdmp_kit::semigroup::evolve_report;
use pdmp_kit::GridDensity;

fn main() -> pdmp_kit::Result<()> {
    let model = drift_redistribute(400);
    let bump = GridDensity::from_fn(model.grid(), |x| (-(x.coords[0] - 0.2).powi(2) / 0.005).exp()).normalized()?;
    let stationary = GridDensity::from_fn(model.grid(), |x| 2.0 * x.coords[0]);
    for t in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let r = evolve_report(&model, &bump, t, 1e-3)?;
        println!(
            "t={t:>4}: mass {:.10}, distance to 2x {:.3e}, steps {}, courant {:.2}",
            r.density.total_mass(),
            r.density.l1_distance(&stationary, model.grid()),
            r.steps,
            r.courant
        );
    }
    Ok(())
}
