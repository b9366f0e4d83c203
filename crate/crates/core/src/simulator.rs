//! Event-driven simulation of the minimal process.

use crate::error::{Error, Result};
use crate::model::{Advance, GridDensity, PdmpModel, StatePoint};
use crate::quadrature::monotone_root;
use crate::rng::path_rng;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

/// Why a holding period ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HoldingCause {
    RateJump,
    BoundaryHit,
    Never,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventCause {
    RateJump,
    BoundaryJump,
    Horizon,
    Censored,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathEvent {
    pub time: f64,
    pub cause: EventCause,
    /// State just before the event (on Γ⁺ for boundary jumps).
    pub pre_state: StatePoint,
    /// State just after the event.
    pub post_state: StatePoint,
}

/// Terminal state of a path.
#[derive(Clone, Debug, PartialEq)]
pub enum FinalState {
    State(StatePoint),
    /// Jump cap exceeded before the horizon.
    Censored,
    /// The flow left the chart (dead state).
    Dead,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub initial: StatePoint,
    pub events: Vec<PathEvent>,
    pub final_state: FinalState,
    pub jump_count: usize,
}

impl Path {
    pub fn censored(&self) -> bool {
        self.final_state == FinalState::Censored
    }
}

/// Outcome of one [`step`].
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Jump(PathEvent),
    /// No jump ever happens from this state.
    Never,
}

#[derive(Clone, Copy, Debug)]
pub struct Caps {
    pub max_jumps: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self { max_jumps: 100_000 }
    }
}

/// Holding times beyond this count as never.
const NEVER: f64 = 1e12;

/// Draws the holding time at `x` from the survival function Φ_x.
pub fn sample_holding(model: &PdmpModel, x: &StatePoint, rng: &mut dyn RngCore) -> Result<(f64, HoldingCause)> {
    let xi: f64 = Exp1.sample(rng);
    holding_for_threshold(model, x, xi)
}

/// Holding time for a given unit-exponential threshold `xi`.
pub fn holding_for_threshold(model: &PdmpModel, x: &StatePoint, xi: f64) -> Result<(f64, HoldingCause)> {
    let tp = model.flow().hit_plus(x);
    let tol = model.numerics().root_tol;
    if tp.is_finite() {
        let total = model.hazard_integral(x, tp)?;
        if total <= xi {
            return Ok((tp, HoldingCause::BoundaryHit));
        }
        let s = root_of_hazard(model, x, xi, 0.0, tp, tol)?;
        return Ok((s.min(tp), HoldingCause::RateJump));
    }
    // Infinite lifetime: bracket by doubling.
    let rate = model.rate(x);
    let mut hi = if rate > 0.0 { (xi / rate).max(1e-12) } else { 1.0 };
    loop {
        if model.hazard_integral(x, hi)? > xi {
            break;
        }
        if hi > NEVER {
            return Ok((f64::INFINITY, HoldingCause::Never));
        }
        hi *= 2.0;
    }
    Ok((root_of_hazard(model, x, xi, 0.0, hi, tol)?, HoldingCause::RateJump))
}

fn root_of_hazard(model: &PdmpModel, x: &StatePoint, xi: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let mut err = None;
    let s = monotone_root(
        |t| match model.hazard_integral(x, t) {
            Ok(h) => h - xi,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
        tol,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(s),
    }
}

/// One holding period followed by a jump.
pub fn step(model: &PdmpModel, x: &StatePoint, rng: &mut dyn RngCore) -> Result<Step> {
    let (sigma, cause) = sample_holding(model, x, rng)?;
    jump_after(model, x, sigma, cause, rng)
}

fn jump_after(model: &PdmpModel, x: &StatePoint, sigma: f64, cause: HoldingCause, rng: &mut dyn RngCore) -> Result<Step> {
    let (pre, cause) = match cause {
        HoldingCause::Never => return Ok(Step::Never),
        HoldingCause::BoundaryHit => (model.flow().phi(sigma, x), EventCause::BoundaryJump),
        HoldingCause::RateJump => (model.flow().phi(sigma, x), EventCause::RateJump),
    };
    let post = model.jump().sample(&pre, rng);
    if !model.in_state_space(&post) {
        return Err(Error::JumpOutsideDomain { from: pre, to: post });
    }
    Ok(Step::Jump(PathEvent { time: sigma, cause, pre_state: pre, post_state: post }))
}

/// Position at time `t` after the last jump from `x`, without further jumps.
fn drift_to(model: &PdmpModel, x: &StatePoint, t: f64) -> Result<FinalState> {
    Ok(match model.advance(x, t)? {
        Advance::Inside(y) => FinalState::State(y),
        Advance::Boundary { point, .. } => FinalState::State(point),
        Advance::OutOfDomain => FinalState::Dead,
    })
}

fn run_path(
    model: &PdmpModel,
    x0: &StatePoint,
    horizon: f64,
    rng: &mut dyn RngCore,
    caps: Caps,
    record: bool,
) -> Result<Path> {
    model.check_state(x0)?;
    let mut t = 0.0;
    let mut x = x0.clone();
    let mut events = Vec::new();
    let mut jumps = 0;
    loop {
        let (sigma, cause) = sample_holding(model, &x, rng)?;
        let remaining = horizon - t;
        if cause == HoldingCause::Never || sigma > remaining {
            let final_state = drift_to(model, &x, remaining)?;
            if record {
                let post = match &final_state {
                    FinalState::State(s) => s.clone(),
                    _ => x.clone(),
                };
                events.push(PathEvent { time: horizon, cause: EventCause::Horizon, pre_state: post.clone(), post_state: post });
            }
            return Ok(Path { initial: x0.clone(), events, final_state, jump_count: jumps });
        }
        if jumps == caps.max_jumps {
            if record {
                let pre = model.flow().phi(sigma, &x);
                events.push(PathEvent { time: t + sigma, cause: EventCause::Censored, pre_state: pre.clone(), post_state: pre });
            }
            return Ok(Path { initial: x0.clone(), events, final_state: FinalState::Censored, jump_count: jumps });
        }
        match jump_after(model, &x, sigma, cause, rng)? {
            Step::Jump(mut ev) => {
                t += sigma;
                ev.time = t;
                x = ev.post_state.clone();
                jumps += 1;
                if record {
                    events.push(ev);
                }
            }
            Step::Never => unreachable!("handled above"),
        }
    }
}

/// Simulates one path up to `horizon`.
pub fn simulate_path(model: &PdmpModel, x0: &StatePoint, horizon: f64, rng: &mut dyn RngCore, caps: Caps) -> Result<Path> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter("horizon must be positive and finite".into()));
    }
    if caps.max_jumps == 0 {
        return Err(Error::InvalidParameter("max_jumps must be at least 1".into()));
    }
    run_path(model, x0, horizon, rng, caps, true)
}

/// Initial law of an ensemble.
#[derive(Clone, Debug)]
pub enum InitialLaw {
    Density(GridDensity),
    Point(StatePoint),
}

/// Histogram estimate of P(t)f.
#[derive(Clone, Debug)]
pub struct DensityEstimate {
    pub density: GridDensity,
    /// Mass of censored or dead paths.
    pub censored_mass: f64,
    /// Mass of surviving paths that ended outside the grid window.
    pub outside_mass: f64,
    pub n_paths: usize,
    pub censored_paths: usize,
}

/// Draws initial states from a grid density: a cell by mass, then a uniform
/// point in the cell.
pub struct DensitySampler {
    cumulative: Vec<f64>,
    scale: f64,
}

impl DensitySampler {
    pub fn new(model: &PdmpModel, f: &GridDensity) -> Result<Self> {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = f
            .values()
            .iter()
            .zip(model.grid().weights())
            .map(|(v, w)| {
                acc += (v * w).max(0.0);
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::ZeroMass("initial density"));
        }
        Ok(Self { cumulative, scale: acc })
    }

    /// Total mass of the density.
    pub fn mass(&self) -> f64 {
        self.scale
    }

    pub fn draw(&self, model: &PdmpModel, rng: &mut dyn RngCore) -> StatePoint {
        let u: f64 = rng.random::<f64>() * self.scale;
        let cell = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        let (g, local) = model.grid().split(cell);
        let (lo, hi) = g.cell_bounds(local);
        let xs: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
        g.point(&xs)
    }
}

/// Paths per rayon work item; fixes the reduction tree.
const CHUNK: usize = 1024;

/// Simulates `n_paths` independent paths to time `t` and histograms them.
///
/// Path `i` uses stream `i` under `seed`; counts are integers, so the result
/// does not depend on the number of worker threads.
pub fn estimate_density(
    model: &PdmpModel,
    init: &InitialLaw,
    t: f64,
    n_paths: usize,
    seed: u64,
    caps: Caps,
) -> Result<DensityEstimate> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be at least 1".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter("t must be positive".into()));
    }
    let grid = model.grid();
    if grid.n_cells() == 0 {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let (sampler, init_mass) = match init {
        InitialLaw::Density(f) => (Some(DensitySampler::new(model, f)?), f.total_mass()),
        InitialLaw::Point(x) => {
            model.check_state(x)?;
            (None, 1.0)
        }
    };
    let n_cells = grid.n_cells();
    // counts[..n_cells] histogram, then censored, outside.
    let chunks = n_paths.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Vec<u64>> {
            let mut counts = vec![0u64; n_cells + 2];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let mut rng = path_rng(seed, i as u64);
                let x0 = match (&sampler, init) {
                    (Some(s), _) => s.draw(model, &mut rng),
                    (None, InitialLaw::Point(x)) => x.clone(),
                    _ => unreachable!(),
                };
                let path = run_path(model, &x0, t, &mut rng, caps, false)?;
                match path.final_state {
                    FinalState::State(y) => match grid.locate(&y) {
                        Some(cell) => counts[cell] += 1,
                        None => counts[n_cells + 1] += 1,
                    },
                    FinalState::Censored | FinalState::Dead => counts[n_cells] += 1,
                }
            }
            Ok(counts)
        })
        .try_reduce(
            || vec![0u64; n_cells + 2],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let per_path = init_mass / n_paths as f64;
    let values: Vec<f64> =
        counts[..n_cells].iter().zip(grid.weights()).map(|(&k, w)| k as f64 * per_path / w).collect();
    Ok(DensityEstimate {
        density: GridDensity::new(grid, values),
        censored_mass: counts[n_cells] as f64 * per_path,
        outside_mass: counts[n_cells + 1] as f64 * per_path,
        n_paths,
        censored_paths: counts[n_cells] as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{drift_redistribute, free_flow, KineticSlabParams, build_kinetic_slab, constant_rate_jumper};

    #[test]
    fn forced_boundary_hit_is_deterministic() {
        let m = drift_redistribute(100);
        let mut rng = path_rng(3, 0);
        let (s, c) = sample_holding(&m, &StatePoint::scalar(0.3), &mut rng).unwrap();
        assert_eq!(c, HoldingCause::BoundaryHit);
        assert!((s - 0.7).abs() < 1e-15);
    }

    #[test]
    fn free_flow_never_jumps() {
        let m = free_flow(100);
        let mut rng = path_rng(3, 0);
        let (s, c) = sample_holding(&m, &StatePoint::scalar(0.3), &mut rng).unwrap();
        assert_eq!(c, HoldingCause::Never);
        assert!(s.is_infinite());
        let path = simulate_path(&m, &StatePoint::scalar(0.0), 3.0, &mut rng, Caps::default()).unwrap();
        assert_eq!(path.jump_count, 0);
        assert_eq!(path.final_state, FinalState::State(StatePoint::scalar(3.0)));
    }

    #[test]
    fn step_on_drift_redistribute() {
        let m = drift_redistribute(100);
        let mut rng = path_rng(5, 1);
        match step(&m, &StatePoint::scalar(0.3), &mut rng).unwrap() {
            Step::Jump(ev) => {
                assert_eq!(ev.cause, EventCause::BoundaryJump);
                assert_eq!(ev.pre_state, StatePoint::scalar(1.0));
                assert!((ev.time - 0.7).abs() < 1e-15);
                assert!(ev.post_state.coords[0] >= 0.0 && ev.post_state.coords[0] < 1.0);
            }
            Step::Never => panic!("must jump"),
        }
    }

    #[test]
    fn specular_step_on_slab() {
        let m = build_kinetic_slab(&KineticSlabParams::two_speed(10)).unwrap();
        let mut rng = path_rng(5, 1);
        match step(&m, &StatePoint::new(&[0.2], 0), &mut rng).unwrap() {
            Step::Jump(ev) => {
                assert!((ev.time - 0.8).abs() < 1e-15);
                assert_eq!(ev.cause, EventCause::BoundaryJump);
                assert_eq!(ev.pre_state, StatePoint::new(&[1.0], 0));
                assert_eq!(ev.post_state, StatePoint::new(&[1.0], 1));
            }
            Step::Never => panic!("must jump"),
        }
    }

    #[test]
    fn jump_cap_censors() {
        let m = constant_rate_jumper(1e3, 10);
        let mut rng = path_rng(9, 0);
        let p = simulate_path(&m, &StatePoint::scalar(0.5), 1.0, &mut rng, Caps { max_jumps: 5 }).unwrap();
        assert!(p.censored());
        assert_eq!(p.jump_count, 5);
        assert_eq!(p.events.last().unwrap().cause, EventCause::Censored);
    }

    #[test]
    fn renewal_gaps() {
        let m = drift_redistribute(10);
        let mut rng = path_rng(11, 0);
        let p = simulate_path(&m, &StatePoint::scalar(0.5), 10.0, &mut rng, Caps::default()).unwrap();
        assert!((p.events[0].time - 0.5).abs() < 1e-15);
        for w in p.events.windows(2) {
            if w[1].cause == EventCause::BoundaryJump {
                let gap = w[1].time - w[0].time;
                assert!((gap - (1.0 - w[0].post_state.coords[0])).abs() < 1e-12);
            }
            assert!(w[1].time > w[0].time);
        }
    }

    #[test]
    fn point_mass_translation() {
        let m = free_flow(200);
        let est = estimate_density(&m, &InitialLaw::Point(StatePoint::scalar(0.0)), 1.0, 100, 1, Caps::default()).unwrap();
        let cell = m.grid().locate(&StatePoint::scalar(1.0)).unwrap();
        assert!((est.density.values()[cell] * m.grid().weights()[cell] - 1.0).abs() < 1e-12);
        assert_eq!(est.censored_mass, 0.0);
    }
}
