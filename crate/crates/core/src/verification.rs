//! Numerical identities and cross-checks between the solvers.

use crate::embedded_chain::{backward_integral, Sources};
use crate::error::{Error, Result};
use crate::model::{GridDensity, PdmpModel, StatePoint};
use crate::quadrature::{gauss_legendre, gauss_legendre_composite};
use crate::rng::path_rng;
use crate::semigroup::{evolve_report, resolvent_g, trace_minus, trace_plus};
use crate::simulator::{estimate_density, simulate_path, Caps, DensityEstimate, DensitySampler, FinalState, InitialLaw};
use rayon::prelude::*;
use serde::Serialize;

/// Test function on the state space.
pub type TestFn<'a> = &'a (dyn Fn(&StatePoint) -> f64 + Sync);

#[derive(Clone, Debug, Serialize)]
pub struct GreenReport {
    /// ∫ T f dm.
    pub interior: f64,
    /// ∫ γ⁻f dm⁻.
    pub inflow: f64,
    /// ∫ γ⁺f dm⁺.
    pub outflow: f64,
    pub residual: f64,
}

/// |∫ Tf dm − (∫ γ⁻f dm⁻ − ∫ γ⁺f dm⁺)| for a density `f` and its transport
/// image `tf` on the grid.
pub fn green_residual(model: &PdmpModel, f: &GridDensity, tf: &GridDensity) -> Result<GreenReport> {
    let atlas = model.atlas();
    let interior = tf.total_mass();
    let inflow: f64 = trace_minus(model, f)?.iter().zip(atlas.minus()).map(|(v, c)| v * c.weight).sum();
    let outflow: f64 = trace_plus(model, f)?.iter().zip(atlas.plus()).map(|(v, c)| v * c.weight).sum();
    Ok(GreenReport { interior, inflow, outflow, residual: (interior - (inflow - outflow)).abs() })
}

/// T f at a point by a centered difference along the flow,
/// `(f(φ₋ₕx)J₋ₕ(x) − f(φₕx)Jₕ(x)) / 2h`.
pub fn transport_image(model: &PdmpModel, f: TestFn<'_>, x: &StatePoint, h: f64) -> f64 {
    let flow = model.flow();
    let back = f(&flow.phi(-h, x)) * flow.jac(-h, x);
    let fwd = f(&flow.phi(h, x)) * flow.jac(h, x);
    (back - fwd) / (2.0 * h)
}

#[derive(Clone, Debug, Serialize)]
pub struct ChangeOfVariablesReport {
    /// Grid sum of f over states that reach Γ⁺.
    pub interior: f64,
    /// ∫_{Γ⁺} ∫₀^{t₋(z)} f(φ₋ₛz) J₋ₛ(z) ds dm⁺(z).
    pub boundary: f64,
    pub relative_error: f64,
}

/// Compares both sides of the disintegration of m along orbits ending on
/// Γ⁺. Every grid cell whose center has finite t₊ counts on the left.
pub fn change_of_variables(model: &PdmpModel, f: TestFn<'_>) -> Result<ChangeOfVariablesReport> {
    let grid = model.grid();
    let flow = model.flow();
    let interior: f64 = (0..grid.n_cells())
        .into_par_iter()
        .map(|c| {
            let x = grid.center(c);
            if flow.hit_plus(&x).is_finite() { f(&x) * grid.weights()[c] } else { 0.0 }
        })
        .sum();
    let mut boundary = 0.0;
    for cell in model.atlas().plus() {
        let tm = cell.lifetime;
        if !tm.is_finite() {
            return Err(Error::Precondition("every Γ⁺ orbit must start on Γ⁻".into()));
        }
        let z = &cell.point;
        let inner = gauss_legendre_composite(|s| f(&flow.phi(-s, z)) * flow.jac(-s, z), 0.0, tm, 64);
        boundary += cell.weight * inner;
    }
    let relative_error = (interior - boundary).abs() / boundary.abs().max(f64::MIN_POSITIVE);
    Ok(ChangeOfVariablesReport { interior, boundary, relative_error })
}

#[derive(Clone, Debug)]
pub struct DuhamelOptions {
    /// Time step of the node grid; defaults to twice the model's quadrature step.
    pub ds: Option<f64>,
    /// Paths used to estimate the probability of more jumps than kept.
    pub tail_paths: usize,
    pub seed: u64,
    /// Refuse to return when the tail estimate exceeds this.
    pub max_tail: Option<f64>,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        Self { ds: None, tail_paths: 20_000, seed: 1, max_tail: None }
    }
}

#[derive(Clone, Debug)]
pub struct DuhamelReport {
    pub density: GridDensity,
    /// Mass of each n-jump term.
    pub term_masses: Vec<f64>,
    /// Estimated mass of paths with more than `n_max` jumps by time t.
    pub tail: f64,
    pub tail_std_error: f64,
}

/// Linear-in-time interpolation of node fields.
struct NodeFields<'a> {
    fields: &'a [Vec<f64>],
    ds: f64,
}

impl NodeFields<'_> {
    fn at(&self, r: f64, eval: impl Fn(&[f64]) -> f64) -> f64 {
        let last = self.fields.len() - 1;
        let u = (r / self.ds).clamp(0.0, last as f64);
        let m = (u.floor() as usize).min(last.saturating_sub(1));
        let a = u - m as f64;
        let v0 = eval(&self.fields[m]);
        if last == 0 || a == 0.0 {
            return v0;
        }
        (1.0 - a) * v0 + a * eval(&self.fields[m + 1])
    }
}

/// Sum of the first `n_max + 1` terms of the jump expansion of P(t)f₀,
/// each computed by quadrature along backward characteristics.
pub fn duhamel_oracle(model: &PdmpModel, f0: &GridDensity, t: f64, n_max: usize, opts: &DuhamelOptions) -> Result<DuhamelReport> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonFiniteTime(t));
    }
    let grid = model.grid();
    let atlas = model.atlas();
    let flow = model.flow();
    let ds0 = opts.ds.unwrap_or(2.0 * model.numerics().quad_step);
    let nodes = (t / ds0).ceil().max(1.0) as usize;
    let ds = t / nodes as f64;
    let centers = grid.centers();
    let plus_points: Vec<StatePoint> = atlas.plus().iter().map(|c| c.point.clone()).collect();

    let u0 = |r: f64, x: &StatePoint| -> Result<f64> {
        if r >= flow.hit_minus(x) {
            return Ok(0.0);
        }
        let y = flow.phi(-r, x);
        Ok(grid.interpolate(f0.values(), &y) * flow.jac(-r, x) * (-model.backward_hazard(x, r)?).exp())
    };
    let eval_all = |r: f64, pts: &[StatePoint], u: &(dyn Fn(f64, &StatePoint) -> Result<f64> + Sync)| -> Result<Vec<f64>> {
        pts.par_iter().map(|x| u(r, x)).collect()
    };

    let mut total: Vec<f64> = eval_all(t, &centers, &u0)?;
    let mut term_masses = vec![grid.mass(&total)];
    // Level-k node values: interior and Γ⁺.
    let mut level_int: Vec<Vec<f64>> = Vec::new();
    let mut level_out: Vec<Vec<f64>> = Vec::new();
    if n_max > 0 {
        for m in 0..=nodes {
            let r = m as f64 * ds;
            level_int.push(eval_all(r, &centers, &u0)?);
            level_out.push(eval_all(r, &plus_points, &u0)?);
        }
    }
    let rates: Vec<f64> = centers.iter().map(|x| model.rate(x)).collect();
    let mesh = model.mesh();
    for k in 1..=n_max {
        let mut gains = Vec::with_capacity(nodes + 1);
        let mut influx = Vec::with_capacity(nodes + 1);
        for (ui, uo) in level_int.iter().zip(&level_out) {
            let rate_part: Vec<f64> = ui.iter().zip(&rates).map(|(u, q)| u * q).collect();
            gains.push(model.jump().p0_apply(mesh, &rate_part, uo));
            influx.push(model.jump().p_partial_apply(mesh, &rate_part, uo));
        }
        let g = NodeFields { fields: &gains, ds };
        let b = NodeFields { fields: &influx, ds };
        let uk = |s: f64, x: &StatePoint| -> Result<f64> {
            let si = |p: &StatePoint, tau: f64| g.at(s - tau, |v| grid.interpolate(v, p));
            let sb = |p: &StatePoint, tau: f64| b.at(s - tau, |v| atlas.interpolate_minus(grid, v, p));
            let src = Sources { interior: &si, boundary: &sb };
            backward_integral(model, x, 0.0, s, ds, &src)?
                .ok_or_else(|| Error::Quadrature("finite-time characteristic integral diverged".into()))
        };
        let now = eval_all(t, &centers, &uk)?;
        term_masses.push(grid.mass(&now));
        for (a, v) in total.iter_mut().zip(&now) {
            *a += v;
        }
        if k < n_max {
            let mut next_int = Vec::with_capacity(nodes + 1);
            let mut next_out = Vec::with_capacity(nodes + 1);
            for m in 0..=nodes {
                let r = m as f64 * ds;
                next_int.push(eval_all(r, &centers, &uk)?);
                next_out.push(eval_all(r, &plus_points, &uk)?);
            }
            level_int = next_int;
            level_out = next_out;
        }
    }

    let (tail, tail_std_error) = if opts.tail_paths > 0 {
        let sampler = DensitySampler::new(model, f0)?;
        let hits: Vec<Result<bool>> = (0..opts.tail_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(opts.seed, i as u64);
                let x0 = sampler.draw(model, &mut rng);
                let caps = Caps { max_jumps: n_max + 1 };
                let path = simulate_path(model, &x0, t, &mut rng, caps)?;
                Ok(path.jump_count > n_max || path.censored())
            })
            .collect();
        let n = opts.tail_paths as f64;
        let k = hits.into_iter().collect::<Result<Vec<_>>>()?.into_iter().filter(|&h| h).count() as f64;
        let p = k / n;
        let mass = sampler.mass();
        (p * mass, (p * (1.0 - p) / n).sqrt() * mass)
    } else {
        (0.0, 0.0)
    };
    if let Some(limit) = opts.max_tail {
        if tail > limit {
            return Err(Error::Precondition(format!("jump tail {tail:.3e} exceeds {limit:.3e}")));
        }
    }
    Ok(DuhamelReport { density: GridDensity::new(grid, total), term_masses, tail, tail_std_error })
}

/// Per-axis coarsening factor that brings the number of comparison bins to
/// at most `target`.
pub fn auto_coarsen(model: &PdmpModel, target: usize) -> usize {
    let grid = model.grid();
    (1..)
        .find(|&r| {
            let bins: usize =
                grid.modes().iter().map(|mg| mg.axes.iter().map(|a| a.len().div_ceil(r)).product::<usize>()).sum();
            bins <= target.max(1) || r > grid.n_cells()
        })
        .unwrap_or(1)
}

/// Mass in bins obtained by merging `factor` consecutive cells along every axis.
pub fn coarse_masses(model: &PdmpModel, values: &[f64], factor: usize) -> Vec<f64> {
    let grid = model.grid();
    let factor = factor.max(1);
    let mut offsets = Vec::new();
    let mut total = 0;
    for mg in grid.modes() {
        offsets.push(total);
        total += mg.axes.iter().map(|a| a.len().div_ceil(factor)).product::<usize>();
    }
    let mut bins = vec![0.0; total];
    for (c, (v, w)) in values.iter().zip(grid.weights()).enumerate() {
        let (mg, local) = grid.split(c);
        let idx = mg.multi_index(local);
        let mut b = 0;
        for (a, i) in mg.axes.iter().zip(&idx) {
            b = b * a.len().div_ceil(factor) + i / factor;
        }
        bins[offsets[mg.mode] + b] += v * w;
    }
    bins
}

#[derive(Clone, Debug)]
pub struct McPdeOptions {
    pub n_paths: usize,
    pub seed: u64,
    pub dt: f64,
    /// Comparison bins.
    pub bins: usize,
    pub caps: Caps,
}

#[derive(Clone, Debug)]
pub struct McPdeReport {
    /// L¹ distance of bin masses.
    pub l1: f64,
    pub bins: usize,
    pub mc: DensityEstimate,
    pub pde: GridDensity,
    /// Mass the PDE solver lost through open faces.
    pub pde_lost: f64,
}

/// Monte Carlo histogram against the forward solver on a coarsened grid.
pub fn mc_vs_pde(model: &PdmpModel, init: &GridDensity, t: f64, opts: &McPdeOptions) -> Result<McPdeReport> {
    let mc = estimate_density(model, &InitialLaw::Density(init.clone()), t, opts.n_paths, opts.seed, opts.caps)?;
    let pde = evolve_report(model, init, t, opts.dt)?;
    let factor = auto_coarsen(model, opts.bins);
    let a = coarse_masses(model, mc.density.values(), factor);
    let b = coarse_masses(model, pde.density.values(), factor);
    let l1 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    Ok(McPdeReport { l1, bins: a.len(), mc, pde: pde.density, pde_lost: pde.lost_mass })
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    /// ∫ ψ R(λ,G)f dm.
    pub lhs: f64,
    /// ‖f‖ E ∫₀^∞ e^{−λs} ψ(X_s) ds.
    pub rhs: f64,
    pub std_error: f64,
    /// Discretization allowance added to the statistical band.
    pub floor: f64,
    pub agree: bool,
}

/// Checks `∫ψ R(λ,G)f = E_f ∫₀^∞ e^{−λs} ψ(X_s) ds` with ψ restricted to
/// the grid window. Paths run to 20/λ.
pub fn resolvent_duality(
    model: &PdmpModel,
    f: &GridDensity,
    psi: TestFn<'_>,
    lambda: f64,
    n_paths: usize,
    seed: u64,
) -> Result<DualityReport> {
    let grid = model.grid();
    let res = resolvent_g(model, f, lambda, 1e-10, 10_000)?;
    let lhs: f64 = res.density.values().iter().zip(grid.weights()).enumerate().map(|(c, (v, w))| v * w * psi(&grid.center(c))).sum();
    let horizon = 20.0 / lambda;
    let sampler = DensitySampler::new(model, f)?;
    let flow = model.flow();
    let piece = (0.25f64).min(1.0 / lambda);
    let window = |p: &StatePoint| if grid.contains(p) { psi(p) } else { 0.0 };
    let values: Vec<Result<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let x0 = sampler.draw(model, &mut rng);
            let path = simulate_path(model, &x0, horizon, &mut rng, Caps::default())?;
            let mut acc = 0.0;
            let mut start = (0.0, x0);
            for ev in &path.events {
                let (a, y) = &start;
                let b = ev.time;
                let n = ((b - a) / piece).ceil().max(1.0) as usize;
                let h = (b - a) / n as f64;
                for k in 0..n {
                    let lo = a + k as f64 * h;
                    acc += gauss_legendre(|s| (-lambda * s).exp() * window(&flow.phi(s - a, y)), lo, lo + h);
                }
                start = (b, ev.post_state.clone());
            }
            if path.final_state == FinalState::Dead {
                log::debug!("path {i} left the chart");
            }
            Ok(acc)
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mass = sampler.mass();
    let rhs = mean * mass;
    let std_error = (var / n).sqrt() * mass;
    let floor = 1e-4 * lhs.abs().max(rhs.abs());
    let agree = (lhs - rhs).abs() <= 3.0 * std_error + floor;
    Ok(DualityReport { lhs, rhs, std_error, floor, agree })
}

#[derive(Clone, Debug, Serialize)]
pub struct LawReport {
    pub samples: usize,
    /// Worst relative error of φ_{s+t} = φ_t ∘ φ_s.
    pub group: f64,
    /// Worst relative error of J_{s+t}(x) = J_t(φ_s x) J_s(x).
    pub cocycle: f64,
    /// Worst relative error of H(x, s+t) = H(x, s) + H(φ_s x, t).
    pub hazard: f64,
}

/// Relative error with unit floor on the scale.
fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Samples states uniformly over the grid and times with `s + t` inside the
/// forward lifetime (capped at `t_max`), and measures the flow, Jacobian and
/// hazard composition laws.
pub fn law_suite(model: &PdmpModel, samples: usize, t_max: f64, seed: u64) -> Result<LawReport> {
    use rand::Rng;
    let grid = model.grid();
    let flow = model.flow();
    let mut rng = path_rng(seed, 0);
    let mut report = LawReport { samples, group: 0.0, cocycle: 0.0, hazard: 0.0 };
    for _ in 0..samples {
        let cell = rng.random_range(0..grid.n_cells());
        let (mg, local) = grid.split(cell);
        let (lo, hi) = mg.cell_bounds(local);
        let xs: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
        let x = mg.point(&xs);
        let span = flow.hit_plus(&x).min(t_max);
        let s = 0.5 * span * rng.random::<f64>();
        let t = 0.5 * span * rng.random::<f64>();
        let direct = flow.phi(s + t, &x);
        let mid = flow.phi(s, &x);
        let composed = flow.phi(t, &mid);
        for (a, b) in direct.coords.iter().zip(&composed.coords) {
            report.group = report.group.max(rel(*a, *b));
        }
        if direct.mode != composed.mode {
            report.group = f64::INFINITY;
        }
        report.cocycle = report.cocycle.max(rel(flow.jac(s + t, &x), flow.jac(t, &mid) * flow.jac(s, &x)));
        let whole = model.hazard_integral(&x, s + t)?;
        let parts = model.hazard_integral(&x, s)? + model.hazard_integral(&mid, t)?;
        report.hazard = report.hazard.max(rel(whole, parts));
    }
    Ok(report)
}

/// Smooth test function adapted to the grid: along axes with an open face
/// it is `sin²(πu)` (vanishing at the truncation), elsewhere `1 + u²`, with
/// `u` the normalized axis coordinate.
pub fn smooth_test_function(model: &PdmpModel) -> impl Fn(&StatePoint) -> f64 + Sync + '_ {
    use crate::model::FaceKind;
    let open: Vec<Vec<bool>> = model
        .grid()
        .modes()
        .iter()
        .map(|mg| {
            (0..mg.axes.len())
                .map(|k| {
                    model
                        .atlas()
                        .faces()
                        .iter()
                        .any(|f| f.kind == FaceKind::Open && f.face.mode == mg.mode && f.face.axis == k)
                })
                .collect()
        })
        .collect();
    move |x: &StatePoint| {
        let Some(mg) = model.grid().modes().get(x.mode) else { return 0.0 };
        mg.axes
            .iter()
            .zip(&open[x.mode])
            .map(|(a, &is_open)| {
                let u = (x.coords[a.coord] - a.lo()) / (a.hi() - a.lo());
                if is_open {
                    if (0.0..=1.0).contains(&u) { (std::f64::consts::PI * u).sin().powi(2) } else { 0.0 }
                } else {
                    1.0 + u * u
                }
            })
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{drift_redistribute, free_flow};

    #[test]
    fn green_on_stationary_profile() {
        let m = drift_redistribute(100);
        let f = GridDensity::from_fn(m.grid(), |x| 2.0 * x.coords[0]);
        let tf = GridDensity::from_fn(m.grid(), |_| -2.0);
        let r = green_residual(&m, &f, &tf).unwrap();
        assert!(r.residual < 1e-12);
        assert!((r.outflow - 2.0).abs() < 1e-12);
    }

    #[test]
    fn transport_image_of_linear_profile() {
        let m = drift_redistribute(10);
        let f = |x: &StatePoint| x.coords[0] * x.coords[0];
        let v = transport_image(&m, &f, &StatePoint::scalar(0.5), 1e-4);
        assert!((v + 1.0).abs() < 1e-8);
    }

    #[test]
    fn change_of_variables_converges() {
        let f = |x: &StatePoint| x.coords[0].exp();
        let coarse = change_of_variables(&drift_redistribute(100), &f).unwrap();
        let fine = change_of_variables(&drift_redistribute(200), &f).unwrap();
        assert!(coarse.relative_error < 1e-4);
        assert!(coarse.relative_error / fine.relative_error > 3.5);
        assert!(change_of_variables(&free_flow(10), &f).unwrap().boundary == 0.0);
    }

    #[test]
    fn coarse_bins_keep_mass() {
        let m = drift_redistribute(200);
        let f = GridDensity::from_fn(m.grid(), |x| 2.0 * x.coords[0]);
        let k = auto_coarsen(&m, 30);
        let bins = coarse_masses(&m, f.values(), k);
        assert!(bins.len() <= 30);
        assert!((bins.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duality_on_free_flow_is_exact() {
        let m = free_flow(200);
        let f = GridDensity::from_fn(m.grid(), |x| if (0.0..1.0).contains(&x.coords[0]) { 1.0 } else { 0.0 });
        let one = |_: &StatePoint| 1.0;
        let r = resolvent_duality(&m, &f, &one, 5.0, 200, 3).unwrap();
        assert!((r.lhs - 0.2).abs() < 1e-4, "{r:?}");
        assert!(r.agree, "{r:?}");
    }
}
