//! Event-driven paths and an ensemble histogram for the drift-and-restart model.

use pdmp_kit::models::drift_redistribute;
use pdmp_kit::rng::path_rng;
use pdmp_kit::simulator::{estimate_density, simulate_path, Caps, InitialLaw};
use pdmp_kit::StatePoint;

fn main() -> pdmp_kit::Result<()> {
    let model = drift_redistribute(20);
    let mut rng = path_rng(42, 0);
    let path = simulate_path(&model, &StatePoint::scalar(0.3), 3.0, &mut rng, Caps::default())?;
    for e in &path.events {
        println!("t={:.4} {:?}: {:.4} -> {:.4}", e.time, e.cause, e.pre_state.coords[0], e.post_state.coords[0]);
    }

    let est = estimate_density(&model, &InitialLaw::Point(StatePoint::scalar(0.3)), 5.0, 100_000, 42, Caps::default())?;
    println!("\nhistogram at t=5 ({} paths, censored mass {}):", est.n_paths, est.censored_mass);
    for (i, v) in est.density.values().iter().enumerate() {
        println!("{:.3} {:.4}", model.grid().center(i).coords[0], v);
    }
    Ok(())
}
