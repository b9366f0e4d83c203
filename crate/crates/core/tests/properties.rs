use pdmp_kit::cli::Config;
use pdmp_kit::embedded_chain::apply_k;
use pdmp_kit::models::{build_cell_cycle, build_kinetic_slab, constant_rate_jumper, drift_redistribute, CellCycleParams, KineticSlabParams};
use pdmp_kit::semigroup::{evolve_report, resolvent_g, transport_step};
use pdmp_kit::{BoundaryDensity, DensityPair, GridDensity, PdmpModel, StatePoint};
use proptest::prelude::*;
use std::sync::OnceLock;

const CELLS: usize = 32;

fn models() -> &'static [PdmpModel] {
    static MODELS: OnceLock<Vec<PdmpModel>> = OnceLock::new();
    MODELS.get_or_init(|| {
        vec![
            drift_redistribute(CELLS),
            constant_rate_jumper(2.0, CELLS),
            build_cell_cycle(&CellCycleParams::toy_with_step(4.0, 0.125)).unwrap(),
            build_kinetic_slab(&KineticSlabParams::two_speed(CELLS)).unwrap(),
        ]
    })
}

fn density(model: &PdmpModel, raw: &[f64]) -> GridDensity {
    let values = (0..model.grid().n_cells()).map(|i| raw[i % raw.len()]).collect();
    GridDensity::new(model.grid(), values)
}

fn pair(model: &PdmpModel, raw: &[f64]) -> DensityPair {
    let b = (0..model.atlas().minus().len()).map(|i| raw[(7 * i + 3) % raw.len()]).collect();
    DensityPair::new(density(model, raw), BoundaryDensity::new(model.atlas(), b))
}

fn raw_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..5.0f64, 1..40).prop_filter("nonzero", |v| v.iter().any(|&x| x > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn k_is_positive_and_contracting(m in 0usize..4, raw in raw_values(), lambda in 0.0..3.0f64) {
        let model = &models()[m];
        let p = pair(model, &raw);
        let out = apply_k(model, &p, lambda).unwrap();
        prop_assert!(out.interior.values().iter().chain(out.boundary.values()).all(|&v| v >= 0.0));
        prop_assert!(out.norm() <= p.norm() * (1.0 + 1e-9));
    }

    #[test]
    fn transport_is_positive_and_never_creates_mass(m in 0usize..4, raw in raw_values(), dt in 0.001..0.05f64) {
        let model = &models()[m];
        let f = density(model, &raw);
        let g = transport_step(model, &f, dt).unwrap();
        prop_assert!(g.values().iter().all(|&v| v >= 0.0));
        prop_assert!(g.total_mass() <= f.total_mass() * (1.0 + 1e-12));
    }

    #[test]
    fn evolution_balances_mass(m in 0usize..4, raw in raw_values(), t in 0.05..1.0f64) {
        let model = &models()[m];
        let f = density(model, &raw);
        let r = evolve_report(model, &f, t, 0.02).unwrap();
        prop_assert!(r.density.values().iter().all(|&v| v >= 0.0));
        let balance = r.density.total_mass() + r.lost_mass - f.total_mass();
        prop_assert!(balance.abs() <= 1e-9 * f.total_mass(), "balance {}", balance);
    }

    #[test]
    fn resolvent_is_substochastic(m in 0usize..4, raw in raw_values(), lambda in 0.2..20.0f64) {
        let model = &models()[m];
        let f = density(model, &raw);
        let r = resolvent_g(model, &f, lambda, 1e-10, 100_000).unwrap();
        prop_assert!(r.density.values().iter().all(|&v| v >= 0.0));
        // The discrete bound carries a second-order quadrature error.
        let h = model.grid().min_width();
        prop_assert!(lambda * r.density.total_mass() <= f.total_mass() * (1.0 + (1.0 + lambda) * h * h));
    }

    #[test]
    fn flow_group_law(m in 0usize..4, u in 0.05..0.95f64, s in 0.0..0.4f64, t in 0.0..0.4f64) {
        let model = &models()[m];
        let x = match m {
            2 => StatePoint::new(&[1.0 + 2.0 * u, 0.0], 0),
            3 => StatePoint::new(&[u], 1),
            _ => StatePoint::scalar(u),
        };
        prop_assume!(s + t < model.flow().hit_plus(&x));
        let flow = model.flow();
        let direct = flow.phi(s + t, &x);
        let composed = flow.phi(t, &flow.phi(s, &x));
        prop_assert_eq!(direct.mode, composed.mode);
        for (a, b) in direct.coords.iter().zip(&composed.coords) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        let jac = flow.jac(s + t, &x) - flow.jac(s, &x) * flow.jac(t, &flow.phi(s, &x));
        prop_assert!(jac.abs() <= 1e-10);
    }

    #[test]
    fn overrides_land_under_task(key in "[a-z]{1,8}", value in -1e6..1e6f64) {
        prop_assume!(key != "seed");
        let mut cfg = Config::parse(r#"{"model": {"name": "drift_redistribute"}}"#).unwrap();
        cfg.apply_overrides(&[format!("--{key}"), value.to_string()]).unwrap();
        prop_assert_eq!(cfg.get(&format!("task.{key}")).and_then(|v| v.as_f64()), Some(value));
        cfg.apply_overrides(&[format!("--nested.{key}"), "\"text\"".into()]).unwrap();
        prop_assert_eq!(cfg.get(&format!("nested.{key}")).and_then(|v| v.as_str()), Some("text"));
    }
}
