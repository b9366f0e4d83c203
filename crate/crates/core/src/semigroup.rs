//! Forward evolution of densities: conservative semi-Lagrangian transport
//! with hazard decay, jump gains through P₀ and Γ⁻ injection through P_∂,
//! combined by Lie splitting. Also the resolvent by its Neumann series.

use crate::embedded_chain::{apply_r0, jump_images};
use crate::error::{Error, Result};
use crate::model::{BoundaryCell, BoundaryDensity, DensityPair, GridDensity, ModeGrid, PdmpModel, Side};
use rayon::prelude::*;
use smallvec::SmallVec;

type Sources = SmallVec<[(usize, f64); 8]>;

/// Cells of `mg` overlapping an axis-aligned box, with overlap measure in
/// axis coordinates.
fn box_overlaps(mg: &ModeGrid, lo: &[f64], hi: &[f64]) -> Sources {
    type AxisOverlaps = SmallVec<[(usize, f64); 4]>;
    let per_axis: SmallVec<[AxisOverlaps; 3]> =
        mg.axes.iter().zip(lo.iter().zip(hi)).map(|(a, (&l, &h))| a.overlaps(l, h)).collect();
    let mut out: Sources = SmallVec::new();
    if per_axis.iter().any(|v| v.is_empty()) {
        return out;
    }
    let mut idx: SmallVec<[usize; 3]> = SmallVec::from_elem(0, per_axis.len());
    let mut cell_idx: SmallVec<[usize; 3]> = SmallVec::from_elem(0, per_axis.len());
    loop {
        let mut measure = 1.0;
        for (k, list) in per_axis.iter().enumerate() {
            let (i, len) = list[idx[k]];
            cell_idx[k] = i;
            measure *= len;
        }
        if measure > 0.0 {
            out.push((mg.offset() + mg.local_index(&cell_idx), measure));
        }
        let mut k = per_axis.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_axis[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Axis-aligned hull of the image of a box under φ_t.
fn traced_box(model: &PdmpModel, mg: &ModeGrid, lo: &[f64], hi: &[f64], t: f64) -> (SmallVec<[f64; 3]>, SmallVec<[f64; 3]>) {
    let d = lo.len();
    let mut new_lo: SmallVec<[f64; 3]> = SmallVec::from_elem(f64::INFINITY, d);
    let mut new_hi: SmallVec<[f64; 3]> = SmallVec::from_elem(f64::NEG_INFINITY, d);
    for corner in 0..(1usize << d) {
        let xs: SmallVec<[f64; 3]> = (0..d).map(|k| if corner >> k & 1 == 0 { lo[k] } else { hi[k] }).collect();
        let p = model.flow().phi(t, &mg.point(&xs));
        for (k, a) in mg.axes.iter().enumerate() {
            new_lo[k] = new_lo[k].min(p.coords[a.coord]);
            new_hi[k] = new_hi[k].max(p.coords[a.coord]);
        }
    }
    (new_lo, new_hi)
}

#[derive(Clone, Debug)]
struct Gather {
    /// Source cells and the reference measure of their overlap.
    sources: Sources,
    survive: f64,
    /// Cells receiving the mass that jumps on the way, with fractions: the
    /// half-way preimage, where a jump happens on average.
    home: Sources,
}

/// Precomputed remap for one transport step of fixed length.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    dt: f64,
    interior: Vec<Gather>,
    plus: Vec<Gather>,
    inject: Vec<Sources>,
    courant: f64,
}

impl TransportPlan {
    pub fn new(model: &PdmpModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
        }
        let grid = model.grid();
        let flow = model.flow();
        let interior: Vec<Result<(Gather, f64)>> = (0..grid.n_cells())
            .into_par_iter()
            .map(|c| {
                let (mg, local) = grid.split(c);
                let (lo, hi) = mg.cell_bounds(local);
                let (plo, phi) = traced_box(model, mg, &lo, &hi, -dt);
                let sources = box_overlaps(mg, &plo, &phi).into_iter().map(|(s, m)| (s, m * mg.weight)).collect();
                let center = mg.center(local);
                let reach = dt.min(flow.hit_minus(&center));
                let survive = (-model.backward_hazard(&center, reach)?).exp();
                let home = if survive < 1.0 { half_way(model, mg, &lo, &hi, c, 0.5 * reach) } else { Sources::new() };
                let courant = (0..lo.len())
                    .map(|k| (plo[k] - lo[k]).abs().max((phi[k] - hi[k]).abs()) / (hi[k] - lo[k]))
                    .fold(0.0, f64::max);
                Ok((Gather { sources, survive, home }, courant))
            })
            .collect();
        let mut courant = 0.0f64;
        let interior = interior
            .into_iter()
            .map(|r| {
                r.map(|(g, c)| {
                    courant = courant.max(c);
                    g
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let atlas = model.atlas();
        let plus = atlas
            .plus()
            .iter()
            .map(|cell| {
                let (mg, lo, hi) = face_box(model, cell, dt, true);
                let (plo, phi) = traced_box(model, mg, &lo, &hi, -dt);
                let sources = box_overlaps(mg, &plo, &phi).into_iter().map(|(s, m)| (s, m * mg.weight)).collect();
                let reach = (0.5 * dt).min(cell.lifetime);
                let survive = (-model.backward_hazard(&cell.point, reach)?).exp();
                Ok(Gather { sources, survive, home: std::iter::once((cell.adjacent, 1.0)).collect() })
            })
            .collect::<Result<Vec<_>>>()?;
        let inject = atlas
            .minus()
            .iter()
            .map(|cell| {
                let (mg, lo, hi) = face_box(model, cell, dt, false);
                let volume: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).product();
                if !(volume > 0.0) {
                    return std::iter::once((cell.adjacent, 1.0)).collect();
                }
                box_overlaps(mg, &lo, &hi).into_iter().map(|(c, m)| (c, m / volume)).collect()
            })
            .collect();
        if courant > 1.0 + 1e-9 {
            log::warn!("time step {dt} moves mass across up to {courant:.2} cells per step");
        }
        Ok(Self { dt, interior, plus, inject, courant })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Largest number of cell widths crossed in one step.
    pub fn courant(&self) -> f64 {
        self.courant
    }
}

/// Fractions of the preimage of a cell box at time −t over the grid,
/// renormalized to the part inside; the cell itself if none is inside.
fn half_way(model: &PdmpModel, mg: &ModeGrid, lo: &[f64], hi: &[f64], cell: usize, t: f64) -> Sources {
    let (plo, phi) = traced_box(model, mg, lo, hi, -t);
    let parts = box_overlaps(mg, &plo, &phi);
    let total: f64 = parts.iter().map(|p| p.1).sum();
    if !(total > 0.0) {
        return std::iter::once((cell, 1.0)).collect();
    }
    parts.into_iter().map(|(c, m)| (c, m / total)).collect()
}

/// Box attached to a boundary cell, in the axis coordinates of its mode.
///
/// For Γ⁺ the box lies beyond the face with twice the normal reach of one
/// step, so that it captures all mass crossing the face. For Γ⁻ it is the
/// strip swept by mass entering during one step, with the tangent extent
/// advected by half a step.
fn face_box<'a>(model: &'a PdmpModel, cell: &BoundaryCell, dt: f64, outgoing: bool) -> (&'a ModeGrid, SmallVec<[f64; 3]>, SmallVec<[f64; 3]>) {
    let info = &model.atlas().faces()[cell.face];
    let mg = model.grid().mode(info.face.mode);
    let axis = info.face.axis;
    let coord = mg.axes[axis].coord;
    let d = mg.axes.len();
    let mut lo: SmallVec<[f64; 3]> = SmallVec::from_elem(info.position, d);
    let mut hi: SmallVec<[f64; 3]> = SmallVec::from_elem(info.position, d);
    for (k, &t) in info.tangent.iter().enumerate() {
        lo[t] = cell.tangent_lo[k];
        hi[t] = cell.tangent_hi[k];
    }
    let flow = model.flow();
    let z = &cell.point;
    if outgoing {
        let reach = (flow.phi(dt, z).coords[coord] - z.coords[coord]).abs().max((flow.phi(-dt, z).coords[coord] - z.coords[coord]).abs());
        let depth = 2.0 * reach + 1e-12 * (1.0 + info.position.abs());
        match info.face.side {
            Side::Hi => hi[axis] = info.position + depth,
            Side::Lo => lo[axis] = info.position - depth,
        }
    } else {
        if !info.tangent.is_empty() {
            let (tlo, thi) = traced_box(model, mg, &lo, &hi, 0.5 * dt);
            for &t in &info.tangent {
                lo[t] = tlo[t];
                hi[t] = thi[t];
            }
        }
        let inner = flow.phi(dt.min(cell.lifetime), z).coords[coord];
        lo[axis] = info.position.min(inner);
        hi[axis] = info.position.max(inner);
    }
    (mg, lo, hi)
}

/// Result of one transport step in masses.
struct TransportOut {
    kept: Vec<f64>,
    rate_loss: Vec<f64>,
    outflux: Vec<f64>,
}

fn transport_masses(model: &PdmpModel, plan: &TransportPlan, f: &[f64]) -> TransportOut {
    let gather = |g: &Gather| g.sources.iter().map(|&(s, m)| f[s] * m).sum::<f64>();
    let w = model.grid().weights();
    let (kept, lost): (Vec<f64>, Vec<f64>) = plan
        .interior
        .par_iter()
        .enumerate()
        .map(|(c, g)| {
            let m = gather(g);
            (g.survive * m / w[c], (1.0 - g.survive) * m)
        })
        .unzip();
    let mut rate_loss = vec![0.0; kept.len()];
    for (g, m) in plan.interior.iter().zip(&lost) {
        if *m != 0.0 {
            for &(c, frac) in &g.home {
                rate_loss[c] += m * frac;
            }
        }
    }
    let mut outflux = Vec::with_capacity(plan.plus.len());
    for g in &plan.plus {
        let m = gather(g);
        for &(c, frac) in &g.home {
            rate_loss[c] += (1.0 - g.survive) * m * frac;
        }
        outflux.push(g.survive * m);
    }
    TransportOut { kept, rate_loss, outflux }
}

/// Free transport with hazard decay over one step; mass that jumps or
/// leaves is dropped.
pub fn transport_step(model: &PdmpModel, f: &GridDensity, dt: f64) -> Result<GridDensity> {
    let plan = TransportPlan::new(model, dt)?;
    Ok(GridDensity::new(model.grid(), transport_masses(model, &plan, f.values()).kept))
}

/// Split stepping: transport, then jump gains and Γ⁻ injection. Gains are
/// advected by half a step to place them at the step midpoint; the mass they
/// lose on the way is carried into the next step's jumps.
pub struct Stepper<'a> {
    model: &'a PdmpModel,
    plan: TransportPlan,
    half: TransportPlan,
    carry_rate: Vec<f64>,
    carry_out: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a PdmpModel, dt: f64) -> Result<Self> {
        let plan = TransportPlan::new(model, dt)?;
        let half = TransportPlan::new(model, 0.5 * dt)?;
        Ok(Self {
            model,
            plan,
            half,
            carry_rate: vec![0.0; model.grid().n_cells()],
            carry_out: vec![0.0; model.atlas().plus().len()],
        })
    }

    pub fn courant(&self) -> f64 {
        self.plan.courant()
    }

    /// Mass awaiting redistribution at the next step.
    pub fn pending_mass(&self) -> f64 {
        self.carry_rate.iter().chain(&self.carry_out).sum()
    }

    pub fn step(&mut self, f: &[f64]) -> Vec<f64> {
        let model = self.model;
        let mut out = transport_masses(model, &self.plan, f);
        for (a, b) in out.rate_loss.iter_mut().zip(&self.carry_rate) {
            *a += b;
        }
        for (a, b) in out.outflux.iter_mut().zip(&self.carry_out) {
            *a += b;
        }
        let grid = model.grid();
        let w = grid.weights();
        let rate_part: Vec<f64> = out.rate_loss.iter().zip(w).map(|(m, w)| m / w).collect();
        let outflux: Vec<f64> = out.outflux.iter().zip(model.atlas().plus()).map(|(m, c)| m / c.weight).collect();
        let mesh = model.mesh();
        let gain = model.jump().p0_apply(mesh, &rate_part, &outflux);
        let moved = transport_masses(model, &self.half, &gain);
        self.carry_rate = moved.rate_loss;
        self.carry_out = moved.outflux;
        let mut next = out.kept;
        for (v, g) in next.iter_mut().zip(&moved.kept) {
            *v += g;
        }
        let influx = model.jump().p_partial_apply(mesh, &rate_part, &outflux);
        for ((b, cell), targets) in influx.iter().zip(model.atlas().minus()).zip(&self.plan.inject) {
            let mass = b * cell.weight;
            if mass != 0.0 {
                for &(c, frac) in targets {
                    next[c] += mass * frac / w[c];
                }
            }
        }
        next
    }

    /// Redistributes carried mass without transport.
    pub fn flush(&mut self, f: &mut [f64]) {
        let model = self.model;
        let w = model.grid().weights();
        let rate_part: Vec<f64> = self.carry_rate.iter().zip(w).map(|(m, w)| m / w).collect();
        let outflux: Vec<f64> = self.carry_out.iter().zip(model.atlas().plus()).map(|(m, c)| m / c.weight).collect();
        if rate_part.iter().chain(&outflux).all(|&v| v == 0.0) {
            return;
        }
        let mesh = model.mesh();
        for (v, g) in f.iter_mut().zip(model.jump().p0_apply(mesh, &rate_part, &outflux)) {
            *v += g;
        }
        let influx = model.jump().p_partial_apply(mesh, &rate_part, &outflux);
        for ((b, cell), targets) in influx.iter().zip(model.atlas().minus()).zip(&self.plan.inject) {
            for &(c, frac) in targets {
                f[c] += b * cell.weight * frac / w[c];
            }
        }
        self.carry_rate.iter_mut().for_each(|v| *v = 0.0);
        self.carry_out.iter_mut().for_each(|v| *v = 0.0);
    }
}

#[derive(Clone, Debug)]
pub struct EvolveReport {
    pub density: GridDensity,
    pub steps: usize,
    /// Mass lost through open faces and grid truncation.
    pub lost_mass: f64,
    pub courant: f64,
}

/// Forward Kolmogorov evolution S(t)f₀ with step `dt`; the last step is
/// shortened to land on `t`.
pub fn evolve_report(model: &PdmpModel, f0: &GridDensity, t: f64, dt: f64) -> Result<EvolveReport> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::NonFiniteTime(t));
    }
    let grid = model.grid();
    let full = (t / dt * (1.0 + 1e-12)).floor() as usize;
    let rest = t - full as f64 * dt;
    let mut stepper = Stepper::new(model, dt)?;
    let mut courant = stepper.courant();
    let mut f = f0.values().to_vec();
    let start = grid.mass(&f);
    for _ in 0..full {
        f = stepper.step(&f);
    }
    let mut steps = full;
    if rest > 1e-12 * dt.max(t) {
        let mut last = Stepper::new(model, rest)?;
        last.carry_rate = std::mem::take(&mut stepper.carry_rate);
        last.carry_out = std::mem::take(&mut stepper.carry_out);
        courant = courant.max(last.courant());
        f = last.step(&f);
        last.flush(&mut f);
        steps += 1;
    } else {
        stepper.flush(&mut f);
    }
    let density = GridDensity::new(grid, f);
    let lost_mass = start - density.total_mass();
    Ok(EvolveReport { density, steps, lost_mass, courant })
}

pub fn evolve(model: &PdmpModel, f0: &GridDensity, t: f64, dt: f64) -> Result<GridDensity> {
    Ok(evolve_report(model, f0, t, dt)?.density)
}

fn traces(model: &PdmpModel, f: &GridDensity, cells: &[BoundaryCell]) -> Result<Vec<f64>> {
    let grid = model.grid();
    let atlas = model.atlas();
    cells
        .iter()
        .map(|cell| {
            let [n0, n1] = cell
                .neighbors
                .ok_or_else(|| Error::GridTooCoarse("a boundary trace needs two cells along the normal".into()))?;
            let info = &atlas.faces()[cell.face];
            let coord = grid.mode(info.face.mode).axes[info.face.axis].coord;
            let c0 = grid.center(n0).coords[coord];
            let c1 = grid.center(n1).coords[coord];
            let (f0, f1) = (f.values()[n0], f.values()[n1]);
            Ok((f0 + (f0 - f1) * (info.position - c0) / (c0 - c1)).max(0.0))
        })
        .collect()
}

/// Boundary values γ⁺f on the Γ⁺ cells by linear extrapolation along the
/// normal, clamped at zero.
pub fn trace_plus(model: &PdmpModel, f: &GridDensity) -> Result<Vec<f64>> {
    traces(model, f, model.atlas().plus())
}

/// Boundary values γ⁻f on the Γ⁻ cells.
pub fn trace_minus(model: &PdmpModel, f: &GridDensity) -> Result<Vec<f64>> {
    traces(model, f, model.atlas().minus())
}

/// Jump gain P₀(ϑf, γ⁺f) and Γ⁻ influx P_∂(ϑf, γ⁺f).
pub fn jump_terms(model: &PdmpModel, f: &GridDensity) -> Result<DensityPair> {
    let grid = model.grid();
    let rate_part: Vec<f64> = f.values().iter().enumerate().map(|(c, v)| model.rate(&grid.center(c)) * v).collect();
    let trace = trace_plus(model, f)?;
    let mesh = model.mesh();
    Ok(DensityPair::new(
        GridDensity::new(grid, model.jump().p0_apply(mesh, &rate_part, &trace)),
        BoundaryDensity::new(model.atlas(), model.jump().p_partial_apply(mesh, &rate_part, &trace)),
    ))
}

#[derive(Clone, Debug)]
pub struct ResolventResult {
    pub density: GridDensity,
    pub terms: usize,
    pub converged: bool,
}

/// R(λ, G)f = Σₙ R₀ K_λⁿ (f, 0), truncated once λ times the mass of a term
/// drops below `tol`.
pub fn resolvent_g(model: &PdmpModel, f: &GridDensity, lambda: f64, tol: f64, max_terms: usize) -> Result<ResolventResult> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("resolvent needs λ > 0".into()));
    }
    let grid = model.grid();
    let mut pair = DensityPair::new(f.clone(), BoundaryDensity::zeros(model.atlas()));
    let mut acc = vec![0.0; grid.n_cells()];
    for n in 1..=max_terms {
        let r = apply_r0(model, &pair, lambda)?;
        for (a, v) in acc.iter_mut().zip(&r.interior) {
            *a += v;
        }
        let term = grid.mass(&r.interior).abs() * lambda;
        pair = jump_images(model, &r);
        if term < tol || pair.norm() == 0.0 {
            return Ok(ResolventResult { density: GridDensity::new(grid, acc), terms: n, converged: true });
        }
    }
    Ok(ResolventResult { density: GridDensity::new(grid, acc), terms: max_terms, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StatePoint;
    use crate::models::{constant_rate_jumper, drift_redistribute, free_flow};

    fn uniform(model: &PdmpModel) -> GridDensity {
        GridDensity::from_fn(model.grid(), |_| 1.0).normalized().unwrap()
    }

    #[test]
    fn transport_is_a_shift_at_unit_courant() {
        let m = free_flow(200);
        let f = GridDensity::from_fn(m.grid(), |x| if (0.0..1.0).contains(&x.coords[0]) { 1.0 } else { 0.0 });
        let dx = 10.0 / 200.0;
        let g = transport_step(&m, &f, dx).unwrap();
        let h = m.grid().locate(&StatePoint::scalar(0.0 + 0.5 * dx)).unwrap();
        assert!(g.values()[h].abs() < 1e-12);
        assert!((g.values()[h + 20] - 1.0).abs() < 1e-12);
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_density_is_kept() {
        let m = drift_redistribute(200);
        let f = GridDensity::from_fn(m.grid(), |x| 2.0 * x.coords[0]);
        let g = evolve(&m, &f, 0.5, 1.0 / 200.0).unwrap();
        assert!(g.l1_distance(&f, m.grid()) < 1e-4, "{}", g.l1_distance(&f, m.grid()));
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_rate_mixes_to_uniform() {
        let m = constant_rate_jumper(1.0, 100);
        let f = GridDensity::from_fn(m.grid(), |x| 2.0 * x.coords[0]);
        let g = evolve(&m, &f, 2.0, 0.01).unwrap();
        let u = uniform(&m);
        let expected = (-2f64).exp() * f.l1_distance(&u, m.grid());
        assert!((g.l1_distance(&u, m.grid()) - expected).abs() < 1e-3);
    }

    #[test]
    fn traces_extrapolate_linearly() {
        let m = drift_redistribute(100);
        let f = GridDensity::from_fn(m.grid(), |x| 2.0 * x.coords[0]);
        assert!((trace_plus(&m, &f).unwrap()[0] - 2.0).abs() < 1e-12);
        assert!(trace_minus(&m, &f).unwrap()[0].abs() < 1e-12);
        let coarse = drift_redistribute(1);
        assert!(matches!(trace_plus(&coarse, &uniform(&coarse)), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn resolvent_is_contractive() {
        let m = drift_redistribute(200);
        let f = uniform(&m);
        let r = resolvent_g(&m, &f, 1.0, 1e-10, 200).unwrap();
        assert!(r.converged);
        assert!((r.density.total_mass() - 1.0).abs() < 1e-4);
    }
}
