//! Collisionless and collisional transport in a slab with reflecting walls.

use pdmp_kit::models::{build_kinetic_slab, Collision, KineticSlabParams, WallOperator};
use pdmp_kit::semigroup::evolve_report;
use pdmp_kit::GridDensity;

fn main() -> pdmp_kit::Result<()> {
    for (collision, wall) in [
        (Collision::None, WallOperator::Specular),
        (Collision::Isotropic { rate: 2.0 }, WallOperator::Specular),
        (Collision::Isotropic { rate: 2.0 }, WallOperator::Diffuse),
    ] {
        let label = format!("{collision:?} / {wall:?}");
        let model = build_kinetic_slab(&KineticSlabParams { collision, wall, ..KineticSlabParams::two_speed(200) })?;
        // All particles start moving right in the left quarter.
        let f = GridDensity::from_fn(model.grid(), |x| if x.mode == 0 && x.coords[0] < 0.25 { 1.0 } else { 0.0 }).normalized()?;
        let r = evolve_report(&model, &f, 3.0, 5e-3)?;
        let right: f64 = r.density.values().iter().zip(model.grid().weights()).zip(model.grid().centers()).filter(|(_, x)| x.mode == 0).map(|((v, w), _)| v * w).sum();
        println!("{label}: mass {:.8}, right-moving fraction {right:.4}", r.density.total_mass());
    }
    Ok(())
}
