//! Embedded jump chain: the resolvent of the free transport R₀, the
//! operator K, its invariant densities and the lift to invariant densities
//! of the continuous-time process.

use crate::error::{Error, Result};
use crate::model::{BoundaryDensity, DensityPair, GridDensity, PdmpModel, StatePoint};
use crate::quadrature::{bisect, exp_trapezoid_weights};
use crate::semigroup::trace_plus;
use rayon::prelude::*;

/// Time-dependent sources along a backward characteristic; the second
/// argument is the elapsed backward time.
pub(crate) struct Sources<'a> {
    pub interior: &'a (dyn Fn(&StatePoint, f64) -> f64 + Sync),
    pub boundary: &'a (dyn Fn(&StatePoint, f64) -> f64 + Sync),
}

/// `∫₀^{min(t₋,limit)} e^{−λτ−H} S(φ₋τ x, τ) J₋τ(x) dτ` plus the Γ⁻ term
/// `e^{−λt₋−H} B(φ₋t₋ x, t₋) J₋t₋(x)` when `t₋ ≤ limit`.
///
/// The integrand is taken piecewise linear between nodes and the discount
/// exponent piecewise linear, which the weights of
/// [`exp_trapezoid_weights`] integrate exactly. Integration stops when the
/// orbit leaves the grid box of its mode (sources vanish there) or the
/// discount exceeds the cutoff. Returns `None` for a divergent integral.
pub(crate) fn backward_integral(
    model: &PdmpModel,
    x: &StatePoint,
    lambda: f64,
    limit: f64,
    step: f64,
    src: &Sources<'_>,
) -> Result<Option<f64>> {
    let num = model.numerics();
    let flow = model.flow();
    let mode_grid = model.grid().mode(x.mode);
    let t_minus = flow.hit_minus(x);
    let end = t_minus.min(limit);
    let mut t = 0.0;
    let mut pt = x.clone();
    let mut jac = 1.0;
    let mut expo = 0.0;
    let mut p0 = (src.interior)(&pt, 0.0);
    let mut sum = 0.0;
    let mut h = step;
    let mut exited = false;
    while t < end && expo <= num.cutoff {
        if t >= num.horizon {
            if p0 != 0.0 && lambda == 0.0 {
                return Ok(None);
            }
            break;
        }
        let mut hh = h.min(end - t);
        let mut next = flow.phi(-hh, &pt);
        let mut leaving = false;
        if !mode_grid.contains(&next) {
            let base = pt.clone();
            hh = bisect(|s| !mode_grid.contains(&flow.phi(-s, &base)), 0.0, hh, 1e-13 * (1.0 + t));
            next = flow.phi(-hh, &pt);
            leaving = true;
        }
        let dh = model.hazard_integral(&next, hh)?;
        let dexpo = lambda * hh + dh;
        if dexpo > num.max_exponent_step && hh > 1e-12 * (1.0 + t) && !leaving {
            h = 0.5 * hh;
            continue;
        }
        let jac_next = jac * flow.jac(-hh, &pt);
        let p1 = (src.interior)(&next, t + hh) * jac_next;
        let (w0, w1) = exp_trapezoid_weights(dexpo);
        sum += (-expo).exp() * hh * (w0 * p0 + w1 * p1);
        // Static orbits with a constant integrand allow growing steps.
        h = if next == pt && p1 == p0 && dexpo < 0.05 { 2.0 * hh } else { step };
        t += hh;
        pt = next;
        jac = jac_next;
        expo += dexpo;
        p0 = p1;
        if leaving {
            exited = t < end;
            break;
        }
    }
    if t_minus.is_finite() && t_minus <= limit && !exited && expo <= num.cutoff {
        // pt is φ₋t₋(x) unless the loop stopped early on the cutoff.
        if t < t_minus {
            let tail = t_minus - t;
            let dh = model.hazard_integral(&flow.phi(-tail, &pt), tail)?;
            jac *= flow.jac(-tail, &pt);
            pt = flow.phi(-tail, &pt);
            expo += lambda * tail + dh;
        }
        sum += (-expo).exp() * (src.boundary)(&pt, t_minus) * jac;
    }
    Ok(Some(sum))
}

/// Values of R(λ, A₀) applied to a pair.
#[derive(Clone, Debug)]
pub struct R0Output {
    /// Values at interior cell centers.
    pub interior: Vec<f64>,
    /// Traces on the Γ⁺ cells.
    pub outflux: Vec<f64>,
}

fn pair_sources<'a>(
    model: &'a PdmpModel,
    pair: &'a DensityPair,
) -> (impl Fn(&StatePoint, f64) -> f64 + Sync + 'a, impl Fn(&StatePoint, f64) -> f64 + Sync + 'a) {
    let grid = model.grid();
    let atlas = model.atlas();
    let interior = move |p: &StatePoint, _: f64| grid.interpolate(pair.interior.values(), p);
    let boundary = move |p: &StatePoint, _: f64| atlas.interpolate_minus(grid, pair.boundary.values(), p);
    (interior, boundary)
}

fn r0_eval(model: &PdmpModel, pair: &DensityPair, lambda: f64, mask: Option<&[bool]>) -> Result<R0Output> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter("λ must be nonnegative".into()));
    }
    let grid = model.grid();
    let step = model.numerics().quad_step;
    let (fi, fb) = pair_sources(model, pair);
    let src = Sources { interior: &fi, boundary: &fb };
    let zero_pair = pair.norm() == 0.0;
    let eval = |x: &StatePoint| -> Result<Option<f64>> {
        if zero_pair {
            return Ok(Some(0.0));
        }
        backward_integral(model, x, lambda, f64::INFINITY, step, &src)
    };
    let interior: Vec<Result<Option<f64>>> = (0..grid.n_cells())
        .into_par_iter()
        .map(|c| if mask.is_some_and(|m| !m[c]) { Ok(Some(0.0)) } else { eval(&grid.center(c)) })
        .collect();
    let outflux: Vec<Result<Option<f64>>> = model.atlas().plus().par_iter().map(|cell| eval(&cell.point)).collect();
    let mut divergent = Vec::new();
    let mut unpack = |v: Vec<Result<Option<f64>>>, offset: usize| -> Result<Vec<f64>> {
        v.into_iter()
            .enumerate()
            .map(|(i, r)| {
                Ok(r?.unwrap_or_else(|| {
                    divergent.push(offset + i);
                    f64::INFINITY
                }))
            })
            .collect()
    };
    let interior = unpack(interior, 0)?;
    let outflux = unpack(outflux, grid.n_cells())?;
    if let Some(&first) = divergent.first() {
        return Err(Error::DivergentCells { count: divergent.len(), first });
    }
    Ok(R0Output { interior, outflux })
}

/// R(λ, A₀) on the interior part plus Ψ(λ) on the boundary part, evaluated at
/// cell centers, with the Γ⁺ traces.
pub fn apply_r0(model: &PdmpModel, pair: &DensityPair, lambda: f64) -> Result<R0Output> {
    r0_eval(model, pair, lambda, None)
}

/// Jump-law image of (ϑ·r, r₊) for an R₀ output.
pub(crate) fn jump_images(model: &PdmpModel, r: &R0Output) -> DensityPair {
    let grid = model.grid();
    let rate_part: Vec<f64> = r.interior.iter().enumerate().map(|(c, v)| model.rate(&grid.center(c)) * v).collect();
    let mesh = model.mesh();
    let gain = model.jump().p0_apply(mesh, &rate_part, &r.outflux);
    let influx = model.jump().p_partial_apply(mesh, &rate_part, &r.outflux);
    DensityPair::new(GridDensity::new(grid, gain), BoundaryDensity::new(model.atlas(), influx))
}

/// The discounted jump-chain operator K_λ; λ = 0 gives K.
pub fn apply_k(model: &PdmpModel, pair: &DensityPair, lambda: f64) -> Result<DensityPair> {
    let grid = model.grid();
    let mask: Vec<bool> = (0..grid.n_cells()).map(|c| model.rate(&grid.center(c)) > 0.0).collect();
    let r = r0_eval(model, pair, lambda, Some(&mask))?;
    Ok(jump_images(model, &r))
}

/// 1 − ‖K pair‖ / ‖pair‖.
pub fn k_stochasticity_defect(model: &PdmpModel, pair: &DensityPair) -> Result<f64> {
    let n = pair.norm();
    if !(n > 0.0) {
        return Err(Error::ZeroMass("stochasticity defect needs a nonzero pair"));
    }
    Ok((1.0 - apply_k(model, pair, 0.0)?.norm() / n).clamp(0.0, 1.0))
}

fn average(model: &PdmpModel, a: &DensityPair, b: &DensityPair) -> DensityPair {
    let mix = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(u, v)| 0.5 * (u + v)).collect() };
    DensityPair::new(
        GridDensity::new(model.grid(), mix(a.interior.values(), b.interior.values())),
        BoundaryDensity::new(model.atlas(), mix(a.boundary.values(), b.boundary.values())),
    )
}

#[derive(Clone, Debug)]
pub struct KInvariant {
    pub pair: DensityPair,
    pub iterations: usize,
    /// Last L¹ increment.
    pub change: f64,
    /// ‖K pair − pair‖.
    pub residual: f64,
    /// ‖K pair‖ at the fixed point.
    pub eigenvalue: f64,
}

/// Power iteration on the lazy operator, `pairₙ₊₁ = normalize((K + I) pairₙ / 2)`.
/// It has the fixed points of K and converges also when K is periodic.
pub fn invariant_of_k(model: &PdmpModel, init: &DensityPair, tol: f64, max_iters: usize) -> Result<KInvariant> {
    let (grid, atlas) = (model.grid(), model.atlas());
    let mut pair = init.normalized()?;
    let mut change = f64::INFINITY;
    for it in 1..=max_iters {
        let next = apply_k(model, &pair, 0.0)?;
        let m = next.norm();
        if !(m > 1e-12) {
            return Err(Error::NoInvariantDensity);
        }
        let next = average(model, &next.scaled(1.0 / m), &pair);
        change = next.l1_distance(&pair, grid, atlas);
        pair = next;
        if change < tol {
            let image = apply_k(model, &pair, 0.0)?;
            let eigenvalue = image.norm();
            if eigenvalue < 1.0 - 1e-3 {
                return Err(Error::NoInvariantDensity);
            }
            let residual = image.l1_distance(&pair, grid, atlas);
            return Ok(KInvariant { pair, iterations: it, change, residual, eigenvalue });
        }
    }
    Err(Error::NotConverged { iterations: max_iters, change })
}

#[derive(Clone, Debug)]
pub struct Lift {
    /// Normalized invariant density.
    pub f_star: GridDensity,
    /// Mass of the unnormalized lift R₀(pair).
    pub c: f64,
}

/// f̄ = R₀(pair), f* = f̄ / ‖f̄‖.
pub fn lift_invariant(model: &PdmpModel, pair: &DensityPair) -> Result<Lift> {
    if !(pair.norm() > 0.0) {
        return Err(Error::ZeroMass("pair is not a density"));
    }
    let r = match apply_r0(model, pair, 0.0) {
        Err(Error::DivergentCells { .. }) => return Err(Error::NonIntegrable),
        other => other?,
    };
    let f_bar = GridDensity::new(model.grid(), r.interior);
    let c = f_bar.total_mass();
    if !c.is_finite() {
        return Err(Error::NonIntegrable);
    }
    if !(c > 0.0) {
        return Err(Error::ZeroMass("lifted density vanishes"));
    }
    Ok(Lift { f_star: f_bar.scaled(1.0 / c), c })
}

/// (P₀(ϑf*, γ⁺f*), P_∂(ϑf*, γ⁺f*)) / c*, with c* = ∫ϑf* + ∫γ⁺f*.
pub fn project_invariant(model: &PdmpModel, f_star: &GridDensity) -> Result<DensityPair> {
    let grid = model.grid();
    let rate_part: Vec<f64> = f_star.values().iter().enumerate().map(|(c, v)| model.rate(&grid.center(c)) * v).collect();
    let trace = trace_plus(model, f_star)?;
    let c_star = grid.mass(&rate_part) + trace.iter().zip(model.atlas().plus()).map(|(v, c)| v * c.weight).sum::<f64>();
    if !(c_star > 0.0) || !c_star.is_finite() {
        return Err(Error::ZeroMass("no jump activity under the density"));
    }
    let mesh = model.mesh();
    let gain = model.jump().p0_apply(mesh, &rate_part, &trace);
    let influx = model.jump().p_partial_apply(mesh, &rate_part, &trace);
    Ok(DensityPair::new(GridDensity::new(grid, gain), BoundaryDensity::new(model.atlas(), influx)).scaled(1.0 / c_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{constant_rate_jumper, drift_redistribute, free_flow};

    fn uniform_pair(model: &PdmpModel) -> DensityPair {
        DensityPair::new(
            GridDensity::from_fn(model.grid(), |_| 1.0).normalized().unwrap(),
            BoundaryDensity::zeros(model.atlas()),
        )
    }

    #[test]
    fn r0_of_uniform_is_linear() {
        let m = drift_redistribute(100);
        let r = apply_r0(&m, &uniform_pair(&m), 0.0).unwrap();
        for (c, v) in r.interior.iter().enumerate() {
            let x = m.grid().center(c).coords[0];
            assert!((v - x).abs() < 1e-13, "{v} vs {x}");
        }
        assert!((r.outflux[0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn r0_of_boundary_atom_is_discounted() {
        let m = drift_redistribute(100);
        let pair = DensityPair::new(GridDensity::zeros(m.grid()), BoundaryDensity::new(m.atlas(), vec![1.0]));
        let r = apply_r0(&m, &pair, 1.0).unwrap();
        for (c, v) in r.interior.iter().enumerate() {
            let x = m.grid().center(c).coords[0];
            assert!((v - (-x).exp()).abs() < 1e-13);
        }
        assert!((r.outflux[0] - (-1f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn zero_pair_gives_zero() {
        let m = drift_redistribute(50);
        let pair = DensityPair::new(GridDensity::zeros(m.grid()), BoundaryDensity::zeros(m.atlas()));
        let r = apply_r0(&m, &pair, 0.0).unwrap();
        assert!(r.interior.iter().chain(&r.outflux).all(|&v| v == 0.0));
    }

    #[test]
    fn k_examples() {
        let m = drift_redistribute(200);
        let k = apply_k(&m, &uniform_pair(&m), 0.0).unwrap();
        assert!(k.interior.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let k1 = apply_k(&m, &uniform_pair(&m), 1.0).unwrap();
        assert!((k1.norm() - (1.0 - (-1f64).exp())).abs() < 1e-10);
        let m2 = free_flow(50);
        assert_eq!(apply_k(&m2, &uniform_pair(&m2), 0.0).unwrap().norm(), 0.0);
    }

    #[test]
    fn defects() {
        let m1 = drift_redistribute(100);
        assert!(k_stochasticity_defect(&m1, &uniform_pair(&m1)).unwrap() < 1e-6);
        let m3 = constant_rate_jumper(2.0, 100);
        assert!(k_stochasticity_defect(&m3, &uniform_pair(&m3)).unwrap() < 1e-6);
        let m2 = free_flow(100);
        assert_eq!(k_stochasticity_defect(&m2, &uniform_pair(&m2)).unwrap(), 1.0);
    }

    #[test]
    fn lift_and_project_on_drift_redistribute() {
        let m = drift_redistribute(100);
        let inv = invariant_of_k(&m, &uniform_pair(&m), 1e-12, 10).unwrap();
        assert_eq!(inv.iterations, 1);
        let lift = lift_invariant(&m, &inv.pair).unwrap();
        assert!((lift.c - 0.5).abs() < 1e-12);
        let back = project_invariant(&m, &lift.f_star).unwrap();
        assert!(back.l1_distance(&inv.pair, m.grid(), m.atlas()) < 1e-12);
        let zero = DensityPair::new(GridDensity::zeros(m.grid()), BoundaryDensity::zeros(m.atlas()));
        assert!(lift_invariant(&m, &zero).is_err());
    }

    #[test]
    fn projection_fails_without_jumps() {
        let m = free_flow(50);
        let f = GridDensity::from_fn(m.grid(), |_| 0.1);
        assert!(matches!(project_invariant(&m, &f), Err(Error::ZeroMass(_))));
    }
}
