use pdmp_kit::models::{build_cell_cycle, constant_rate_jumper, drift_redistribute, free_flow, CellCycleParams};
use pdmp_kit::rng::path_rng;
use pdmp_kit::simulator::{estimate_density, simulate_path, Caps, EventCause, InitialLaw};
use pdmp_kit::{GridDensity, StatePoint};

fn ks_uniform(mut s: Vec<f64>) -> f64 {
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().map(|(i, &u)| (u - i as f64 / n).max((i + 1) as f64 / n - u)).fold(0.0, f64::max)
}

#[test]
fn jump_counts_of_constant_rate_are_poisson() {
    let (q, t, n) = (1.5, 2.0, 20_000);
    let m = constant_rate_jumper(q, 50);
    let counts: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = path_rng(21, i);
            simulate_path(&m, &StatePoint::scalar(0.5), t, &mut rng, Caps::default()).unwrap().jump_count as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let lambda = q * t;
    // Standard errors of the sample mean and variance of Poisson(λ).
    assert!((mean - lambda).abs() < 4.0 * (lambda / n as f64).sqrt(), "mean {mean}");
    assert!((var - lambda).abs() < 4.0 * ((lambda + 2.0 * lambda * lambda) / n as f64).sqrt(), "var {var}");
}

#[test]
fn drift_redistribute_renews_at_the_right_end() {
    let m = drift_redistribute(50);
    let mut restarts = Vec::new();
    for i in 0..5000 {
        let mut rng = path_rng(5, i);
        let path = simulate_path(&m, &StatePoint::scalar(0.3), 3.0, &mut rng, Caps::default()).unwrap();
        let jumps: Vec<_> = path.events.iter().filter(|e| e.cause == EventCause::BoundaryJump).collect();
        assert!((jumps[0].time - 0.7).abs() < 1e-12);
        for pair in jumps.windows(2) {
            let gap = pair[1].time - pair[0].time;
            assert!((gap - (1.0 - pair[0].post_state.coords[0])).abs() < 1e-9);
        }
        for e in &jumps {
            assert!((e.pre_state.coords[0] - 1.0).abs() < 1e-12);
            restarts.push(e.post_state.coords[0]);
        }
        assert!(path.events.iter().all(|e| e.cause != EventCause::RateJump));
    }
    assert!(ks_uniform(restarts) < 0.015);
}

#[test]
fn free_flow_never_jumps() {
    let m = free_flow(50);
    let mut rng = path_rng(1, 0);
    let path = simulate_path(&m, &StatePoint::scalar(0.2), 0.5, &mut rng, Caps::default()).unwrap();
    assert_eq!(path.jump_count, 0);
}

#[test]
fn cell_cycle_alternates_phases_and_halves_at_division() {
    let p = CellCycleParams::toy();
    let m = build_cell_cycle(&p).unwrap();
    for i in 0..500 {
        let mut rng = path_rng(9, i);
        let path = simulate_path(&m, &StatePoint::new(&[1.0, 0.0], 0), 8.0, &mut rng, Caps::default()).unwrap();
        let jumps: Vec<_> = path.events.iter().filter(|e| e.cause != EventCause::Horizon).collect();
        for (k, e) in jumps.iter().enumerate() {
            assert_ne!(e.pre_state.mode, e.post_state.mode);
            if e.pre_state.mode == 1 {
                assert!((e.post_state.coords[0] - 0.5 * e.pre_state.coords[0]).abs() < 1e-12);
                assert!((e.pre_state.coords[1] - p.t_two).abs() < 1e-9);
                assert!((e.time - jumps[k - 1].time - p.t_two).abs() < 1e-9);
            } else {
                assert_eq!(e.post_state.coords[0], e.pre_state.coords[0]);
            }
        }
    }
}

#[test]
fn histogram_does_not_depend_on_the_pool_size() {
    let m = drift_redistribute(64);
    let f = GridDensity::from_fn(m.grid(), |x| 2.0 * x.coords[0]);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_density(&m, &InitialLaw::Density(f.clone()), 0.7, 5000, 17, Caps::default()).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.density.values(), b.density.values());
    assert_eq!(a.censored_paths, b.censored_paths);
}

#[test]
fn jump_cap_censors_paths() {
    let m = constant_rate_jumper(50.0, 10);
    let est = estimate_density(&m, &InitialLaw::Point(StatePoint::scalar(0.5)), 1.0, 200, 2, Caps { max_jumps: 5 }).unwrap();
    assert_eq!(est.censored_paths, 200);
    assert!((est.censored_mass - 1.0).abs() < 1e-12);
}
