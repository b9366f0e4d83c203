//! Subcommand pipelines.

use super::config::Config;
use super::output::{boundary_csv, density_csv, write_text, Check, Masses, Summary};
use crate::embedded_chain::{invariant_of_k, k_stochasticity_defect, lift_invariant};
use crate::error::{Error, Result};
use crate::model::{BoundaryDensity, DensityPair, GridDensity, PdmpModel, StatePoint};
use crate::models::build_by_name;
use crate::semigroup::{evolve, evolve_report, resolvent_g};
use crate::simulator::{estimate_density, Caps, InitialLaw};
use crate::verification::{
    change_of_variables, duhamel_oracle, green_residual, law_suite, mc_vs_pde, resolvent_duality, smooth_test_function,
    transport_image, DuhamelOptions, McPdeOptions,
};
use clap::ValueEnum;
use serde_json::{json, Map, Value};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Simulate,
    Evolve,
    Invariant,
    Embedded,
    Resolvent,
    Verify,
}

impl Subcommand {
    fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Evolve => "evolve",
            Self::Invariant => "invariant",
            Self::Embedded => "embedded",
            Self::Resolvent => "resolvent",
            Self::Verify => "verify",
        }
    }
}

/// Result of a run: whether every tolerance held.
pub struct Outcome {
    pub passed: bool,
    pub summary: Summary,
}

/// Built-in models run by `verify` when the model name is `all`.
const ALL_MODELS: [&str; 5] = ["drift_redistribute", "free_flow", "constant_rate", "cell_cycle", "kinetic_slab"];

fn build(cfg: &Config) -> Result<PdmpModel> {
    build_by_name(&cfg.model_name()?, &cfg.model_params())
}

/// Default time step: about one cell per step.
fn default_dt(model: &PdmpModel) -> f64 {
    2.0 * model.numerics().quad_step
}

enum Init {
    Density(GridDensity),
    Point(StatePoint),
}

fn as_vec(v: Option<&Value>, what: &str) -> Result<Option<Vec<f64>>> {
    match v {
        None => Ok(None),
        Some(Value::Array(a)) => a
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::Config(format!("`{what}` must hold numbers"))))
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(_) => Err(Error::Config(format!("`{what}` must be an array"))),
    }
}

/// `task.init`: absent or `"uniform"` for the normalized uniform density, or
/// an object with optional `mode`, `lo`, `hi` (a box in state coordinates)
/// or `point` (a single state, simulation only).
fn initial(cfg: &Config, model: &PdmpModel) -> Result<Init> {
    let spec = cfg.get("task.init");
    let obj = match spec {
        None => None,
        Some(Value::String(s)) if s == "uniform" => None,
        Some(Value::Object(o)) => Some(o),
        Some(other) => return Err(Error::Config(format!("unsupported `task.init`: {other}"))),
    };
    let mode = obj.and_then(|o| o.get("mode")).map(|m| m.as_u64().map(|m| m as usize));
    let mode = match mode {
        Some(None) => return Err(Error::Config("`task.init.mode` must be an integer".into())),
        Some(Some(m)) => Some(m),
        None => None,
    };
    if let Some(p) = as_vec(obj.and_then(|o| o.get("point")), "task.init.point")? {
        let x = StatePoint::new(&p, mode.unwrap_or(0));
        model.check_state(&x)?;
        return Ok(Init::Point(x));
    }
    let lo = as_vec(obj.and_then(|o| o.get("lo")), "task.init.lo")?;
    let hi = as_vec(obj.and_then(|o| o.get("hi")), "task.init.hi")?;
    let inside = |x: &StatePoint| {
        mode.is_none_or(|m| m == x.mode)
            && lo.as_ref().is_none_or(|l| l.iter().zip(&x.coords).all(|(a, b)| b >= a))
            && hi.as_ref().is_none_or(|h| h.iter().zip(&x.coords).all(|(a, b)| b <= a))
    };
    let f = GridDensity::from_fn(model.grid(), |x| if inside(x) { 1.0 } else { 0.0 });
    Ok(Init::Density(f.normalized().map_err(|_| Error::Config("`task.init` selects no grid cell".into()))?))
}

fn initial_density(cfg: &Config, model: &PdmpModel) -> Result<GridDensity> {
    match initial(cfg, model)? {
        Init::Density(f) => Ok(f),
        Init::Point(_) => Err(Error::Config("a point initial state is only supported by `simulate`".into())),
    }
}

fn summary(sub: Subcommand, model_name: &str, parameters: Value, seed: u64) -> Summary {
    Summary {
        subcommand: sub.name().into(),
        model: model_name.into(),
        parameters,
        masses: Masses::default(),
        residuals: Map::new(),
        wall_time_seconds: 0.0,
        seed,
        checks: Vec::new(),
    }
}

pub fn run(cfg: &Config, sub: Subcommand) -> Result<Outcome> {
    let start = Instant::now();
    let seed = cfg.seed()?;
    let dir = cfg.output_dir();
    let name = cfg.model_name()?;
    if sub == Subcommand::Verify {
        let names: Vec<String> = if name == "all" { ALL_MODELS.iter().map(|s| s.to_string()).collect() } else { vec![name.clone()] };
        let mut s = summary(sub, &name, cfg.model_params(), seed);
        for n in &names {
            let model = build_by_name(n, &cfg.model_params())?;
            s.checks.extend(verify_checks(cfg, &model, seed)?);
        }
        let passed = s.checks.iter().all(|c| c.passed);
        for c in &s.checks {
            s.residuals.insert(format!("{}/{}", c.model, c.name), json!(c.value));
        }
        s.wall_time_seconds = start.elapsed().as_secs_f64();
        write_text(&dir, "summary.json", &serde_json::to_string_pretty(&s)?)?;
        return Ok(Outcome { passed, summary: s });
    }
    let model = build(cfg)?;
    let mut s = summary(sub, model.name(), model.parameters().clone(), seed);
    let mut passed = true;
    let values: Vec<f64> = match sub {
        Subcommand::Simulate => {
            let t = cfg.task_f64("t", 1.0)?;
            let paths = cfg.task_usize("paths", 10_000)?;
            let caps = Caps { max_jumps: cfg.task_usize("max_jumps", Caps::default().max_jumps)? };
            let law = match initial(cfg, &model)? {
                Init::Density(f) => InitialLaw::Density(f),
                Init::Point(x) => InitialLaw::Point(x),
            };
            s.masses.input = match &law {
                InitialLaw::Density(f) => f.total_mass(),
                InitialLaw::Point(_) => 1.0,
            };
            let est = estimate_density(&model, &law, t, paths, seed, caps)?;
            s.masses.output = est.density.total_mass();
            s.masses.censored = est.censored_mass;
            s.masses.defect = est.outside_mass;
            s.residuals.insert("paths".into(), json!(est.n_paths));
            s.residuals.insert("censored_paths".into(), json!(est.censored_paths));
            est.density.into_values()
        }
        Subcommand::Evolve => {
            let f0 = initial_density(cfg, &model)?;
            let t = cfg.task_f64("t", 1.0)?;
            let dt = cfg.task_f64("dt", default_dt(&model))?;
            let r = evolve_report(&model, &f0, t, dt)?;
            s.masses.input = f0.total_mass();
            s.masses.output = r.density.total_mass();
            s.masses.censored = r.lost_mass;
            s.residuals.insert("steps".into(), json!(r.steps));
            s.residuals.insert("courant".into(), json!(r.courant));
            r.density.into_values()
        }
        Subcommand::Invariant | Subcommand::Embedded => {
            let f0 = initial_density(cfg, &model)?;
            let init = DensityPair::new(f0, BoundaryDensity::zeros(model.atlas()));
            let tol = cfg.task_f64("tol", 1e-12)?;
            let iters = cfg.task_usize("max_iters", 500)?;
            let inv = invariant_of_k(&model, &init, tol, iters)?;
            let limit = cfg.tolerance("residual", 1e-6)?;
            passed = inv.residual < limit;
            s.masses.input = inv.pair.norm();
            s.masses.defect = k_stochasticity_defect(&model, &inv.pair)?;
            s.residuals.insert("k_residual".into(), json!(inv.residual));
            s.residuals.insert("iterations".into(), json!(inv.iterations));
            if sub == Subcommand::Embedded {
                s.masses.output = inv.pair.norm();
                write_text(&dir, "boundary.csv", &boundary_csv(&model, inv.pair.boundary.values()))?;
                inv.pair.interior.into_values()
            } else {
                let lift = lift_invariant(&model, &inv.pair)?;
                s.masses.output = lift.f_star.total_mass();
                s.residuals.insert("lift_mass".into(), json!(lift.c));
                if cfg.task_f64("stationarity_t", 0.0)? > 0.0 {
                    let t = cfg.task_f64("stationarity_t", 0.0)?;
                    let g = evolve(&model, &lift.f_star, t, cfg.task_f64("dt", default_dt(&model))?)?;
                    s.residuals.insert("evolve_drift".into(), json!(g.l1_distance(&lift.f_star, model.grid())));
                }
                lift.f_star.into_values()
            }
        }
        Subcommand::Resolvent => {
            let f = initial_density(cfg, &model)?;
            let lambda = cfg.task_f64("lambda", 1.0)?;
            let r = resolvent_g(&model, &f, lambda, cfg.task_f64("tol", 1e-10)?, cfg.task_usize("max_terms", 10_000)?)?;
            s.masses.input = f.total_mass();
            s.masses.output = lambda * r.density.total_mass();
            s.masses.defect = s.masses.input - s.masses.output;
            s.residuals.insert("terms".into(), json!(r.terms));
            s.residuals.insert("converged".into(), json!(r.converged));
            passed = r.converged;
            r.density.into_values()
        }
        Subcommand::Verify => unreachable!(),
    };
    write_text(&dir, "density.csv", &density_csv(&model, &values))?;
    s.wall_time_seconds = start.elapsed().as_secs_f64();
    write_text(&dir, "summary.json", &serde_json::to_string_pretty(&s)?)?;
    Ok(Outcome { passed, summary: s })
}

fn check(model: &PdmpModel, name: &str, value: f64, tolerance: f64, detail: String) -> Check {
    Check { name: name.into(), model: model.name().into(), value, tolerance, passed: value <= tolerance, detail }
}

/// Checks run by `verify` on one model; those whose preconditions fail are
/// skipped.
fn verify_checks(cfg: &Config, model: &PdmpModel, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let grid = model.grid();

    let laws = law_suite(model, cfg.task_usize("law_samples", 1000)?, 2.0, seed)?;
    let worst = laws.group.max(laws.cocycle).max(laws.hazard);
    out.push(check(model, "laws", worst, cfg.tolerance("laws", 1e-6)?, format!("{laws:?}")));

    let psi = smooth_test_function(model);
    let f = GridDensity::from_fn(grid, &psi);
    let h = 1e-5 * model.numerics().quad_step.min(1.0);
    let tf = GridDensity::from_fn(grid, |x| transport_image(model, &psi, x, h));
    let g = green_residual(model, &f, &tf)?;
    out.push(check(model, "green", g.residual, cfg.tolerance("green", 1e-3)?, format!("{g:?}")));

    if !model.atlas().plus().is_empty() {
        match change_of_variables(model, &psi) {
            Ok(c) => out.push(check(model, "change_of_variables", c.relative_error, cfg.tolerance("change_of_variables", 1e-3)?, format!("{c:?}"))),
            Err(Error::Precondition(msg)) => log::info!("{}: change of variables skipped: {msg}", model.name()),
            Err(e) => return Err(e),
        }
    }

    let f0 = f.normalized()?;
    let t = cfg.task_f64("t", 0.2)?;
    let dt = cfg.task_f64("dt", default_dt(model))?;
    let pde = evolve(model, &f0, t, dt)?;
    let opts = DuhamelOptions { ds: Some(dt), tail_paths: 4000, seed, max_tail: None };
    let d = duhamel_oracle(model, &f0, t, 2, &opts)?;
    let gap = d.density.l1_distance(&pde, grid);
    out.push(check(model, "duhamel", gap, cfg.tolerance("duhamel", 2e-2)? + d.tail + 3.0 * d.tail_std_error, format!("tail {:.3e}", d.tail)));

    let mc = mc_vs_pde(
        model,
        &f0,
        t,
        &McPdeOptions { n_paths: cfg.task_usize("paths", 20_000)?, seed, dt, bins: 100, caps: Caps::default() },
    )?;
    // Expected L¹ sampling error of a histogram with K bins is about √(2K/πN).
    let noise = (2.0 * mc.bins as f64 / (std::f64::consts::PI * mc.mc.n_paths as f64)).sqrt();
    let tol = cfg.tolerance("mc_vs_pde", 2.0 * noise + 0.02)?;
    out.push(check(model, "mc_vs_pde", mc.l1, tol, format!("{} bins, sampling scale {noise:.3e}", mc.bins)));

    let lambda = cfg.task_f64("lambda", 1.0)?;
    let dual = resolvent_duality(model, &f0, &psi, lambda, cfg.task_usize("duality_paths", 4000)?, seed)?;
    let excess = ((dual.lhs - dual.rhs).abs() - 3.0 * dual.std_error - dual.floor).max(0.0);
    out.push(check(model, "resolvent_duality", excess, 0.0, format!("{dual:?}")));
    Ok(out)
}
