//! Kinetic slab: free streaming on (0, L) with a finite velocity set,
//! velocity-changing collisions and a wall operator at the ends.

use crate::error::{Error, Result};
use crate::model::*;
use rand::{Rng, RngCore};
use serde_json::json;
use std::sync::Arc;

/// Collision kernel `k(v', v)`: rate density of switching from `v` to `v'`.
#[derive(Clone, Debug, PartialEq)]
pub enum Collision {
    None,
    /// `k ≡ σ / Σν`, so every velocity collides at rate `σ`.
    Isotropic { rate: f64 },
    /// `k[post][pre]`.
    Matrix(Vec<Vec<f64>>),
}

/// Operator sending Γ⁺ flux to Γ⁻ flux.
#[derive(Clone, Debug, PartialEq)]
pub enum WallOperator {
    /// v ↦ −v at the same wall.
    Specular,
    /// Re-emission over all incoming velocities of the same wall,
    /// proportional to their m⁻ weights.
    Diffuse,
    /// Transfer probabilities `[from Γ⁺ cell][to Γ⁻ cell]` in atlas order.
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KineticSlabParams {
    pub length: f64,
    /// Velocities and their ν weights.
    pub velocities: Vec<(f64, f64)>,
    pub collision: Collision,
    pub wall: WallOperator,
    pub cells: usize,
}

impl KineticSlabParams {
    /// Velocities ±1 with weight 1/2 each on (0,1), collisionless, specular walls.
    pub fn two_speed(cells: usize) -> Self {
        Self {
            length: 1.0,
            velocities: vec![(1.0, 0.5), (-1.0, 0.5)],
            collision: Collision::None,
            wall: WallOperator::Specular,
            cells,
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let mut p = Self::two_speed(v.get("cells").and_then(|c| c.as_u64()).unwrap_or(200) as usize);
        if let Some(l) = v.get("length").and_then(|x| x.as_f64()) {
            p.length = l;
        }
        if let Some(vs) = v.get("velocities").and_then(|x| x.as_array()) {
            let vels: Option<Vec<f64>> = vs.iter().map(|x| x.as_f64()).collect();
            let vels = vels.ok_or_else(|| Error::Config("velocities must be numbers".into()))?;
            let weights: Vec<f64> = match v.get("weights").and_then(|x| x.as_array()) {
                Some(ws) => ws.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect(),
                None => vec![1.0 / vels.len() as f64; vels.len()],
            };
            if weights.len() != vels.len() {
                return Err(Error::Config("weights and velocities differ in length".into()));
            }
            p.velocities = vels.into_iter().zip(weights).collect();
        }
        if let Some(s) = v.get("collision_rate").and_then(|x| x.as_f64()) {
            p.collision = if s > 0.0 { Collision::Isotropic { rate: s } } else { Collision::None };
        }
        match v.get("wall").and_then(|x| x.as_str()) {
            None | Some("specular") => p.wall = WallOperator::Specular,
            Some("diffuse") => p.wall = WallOperator::Diffuse,
            Some(other) => return Err(Error::Config(format!("unknown wall operator `{other}`"))),
        }
        Ok(p)
    }

    fn kernel(&self, post: usize, pre: usize) -> f64 {
        match &self.collision {
            Collision::None => 0.0,
            Collision::Isotropic { rate } => rate / self.velocities.iter().map(|v| v.1).sum::<f64>(),
            Collision::Matrix(k) => k[post][pre],
        }
    }

    /// Collision frequency ϑ(v) = Σ_{v'} k(v', v) ν(v').
    pub fn collision_rate(&self, pre: usize) -> f64 {
        (0..self.velocities.len()).map(|post| self.kernel(post, pre) * self.velocities[post].1).sum()
    }
}

struct SlabFlow {
    length: f64,
    velocities: Vec<f64>,
}

impl FlowMap for SlabFlow {
    fn phi(&self, t: f64, x: &StatePoint) -> StatePoint {
        StatePoint::new(&[x.coords[0] + self.velocities[x.mode] * t], x.mode)
    }

    fn jac(&self, _t: f64, _x: &StatePoint) -> f64 {
        1.0
    }

    fn hit_plus(&self, x: &StatePoint) -> f64 {
        let v = self.velocities[x.mode];
        if v > 0.0 {
            ((self.length - x.coords[0]) / v).max(0.0)
        } else if v < 0.0 {
            (x.coords[0] / -v).max(0.0)
        } else {
            f64::INFINITY
        }
    }

    fn hit_minus(&self, x: &StatePoint) -> f64 {
        let v = self.velocities[x.mode];
        if v > 0.0 {
            (x.coords[0] / v).max(0.0)
        } else if v < 0.0 {
            ((self.length - x.coords[0]) / -v).max(0.0)
        } else {
            f64::INFINITY
        }
    }

    fn divergence(&self, _x: &StatePoint) -> Option<f64> {
        Some(0.0)
    }

    fn contains(&self, x: &StatePoint) -> bool {
        x.mode < self.velocities.len() && x.coords[0] >= 0.0 && x.coords[0] <= self.length
    }
}

struct SlabJump {
    /// Post-velocity probabilities per pre-velocity.
    collide: Vec<Vec<f64>>,
    /// `k(v', v)/ϑ(v)` factors per [post][pre], zero where ϑ = 0.
    gain: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// Wall transfer probabilities [Γ⁺ cell][Γ⁻ cell].
    transfer: Vec<Vec<f64>>,
    plus_points: Vec<StatePoint>,
    minus_points: Vec<StatePoint>,
}

fn pick(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

impl JumpLaw for SlabJump {
    fn sample(&self, from: &StatePoint, rng: &mut dyn RngCore) -> StatePoint {
        let at_wall = self.plus_points.iter().position(|z| {
            z.mode == from.mode && (z.coords[0] - from.coords[0]).abs() <= BOX_TOL * (1.0 + z.coords[0].abs())
        });
        match at_wall {
            Some(i) => self.minus_points[pick(&self.transfer[i], rng)].clone(),
            None => StatePoint::new(&from.coords, pick(&self.collide[from.mode], rng)),
        }
    }

    fn p0_apply(&self, mesh: &Mesh, rate_part: &[f64], _outflux: &[f64]) -> Vec<f64> {
        let grid = &mesh.grid;
        let nv = self.weights.len();
        let nx = grid.mode(0).n_cells();
        let mut out = vec![0.0; grid.n_cells()];
        for post in 0..nv {
            for pre in 0..nv {
                let g = self.gain[post][pre] * self.weights[pre];
                if g == 0.0 {
                    continue;
                }
                for i in 0..nx {
                    out[post * nx + i] += g * rate_part[pre * nx + i];
                }
            }
        }
        out
    }

    fn p_partial_apply(&self, mesh: &Mesh, _rate_part: &[f64], outflux: &[f64]) -> Vec<f64> {
        let atlas = &mesh.atlas;
        let mut mass = vec![0.0; atlas.minus().len()];
        for (i, (b, cell)) in outflux.iter().zip(atlas.plus()).enumerate() {
            for (j, p) in self.transfer[i].iter().enumerate() {
                mass[j] += p * b * cell.weight;
            }
        }
        mass.iter().zip(atlas.minus()).map(|(m, c)| m / c.weight).collect()
    }
}

pub fn build_kinetic_slab(p: &KineticSlabParams) -> Result<PdmpModel> {
    let nv = p.velocities.len();
    if nv == 0 || p.cells == 0 || !(p.length > 0.0) {
        return Err(Error::InvalidParameter("slab needs velocities, cells and positive length".into()));
    }
    if p.velocities.iter().any(|&(v, w)| !v.is_finite() || !(w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("velocity weights must be positive and finite".into()));
    }
    if let Collision::Matrix(k) = &p.collision {
        if k.len() != nv || k.iter().any(|r| r.len() != nv || r.iter().any(|&x| !(x >= 0.0) || !x.is_finite())) {
            return Err(Error::InvalidParameter("collision matrix must be nonnegative and square in the velocities".into()));
        }
    }
    if let Collision::Isotropic { rate } = p.collision {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter("collision rate must be nonnegative".into()));
        }
    }
    let velocities: Vec<f64> = p.velocities.iter().map(|v| v.0).collect();
    let weights: Vec<f64> = p.velocities.iter().map(|v| v.1).collect();
    let modes: Vec<ModeGrid> = (0..nv)
        .map(|k| ModeGrid::new(k, 1, vec![Axis::uniform(0, 0.0, p.length, p.cells)], vec![], weights[k]))
        .collect();
    let grid = InteriorGrid::new(modes);
    let flow = SlabFlow { length: p.length, velocities: velocities.clone() };
    let mut faces = Vec::new();
    for (k, &v) in velocities.iter().enumerate() {
        let (lo, hi) = if v > 0.0 {
            (FaceKind::Incoming, FaceKind::Outgoing)
        } else if v < 0.0 {
            (FaceKind::Outgoing, FaceKind::Incoming)
        } else {
            (FaceKind::Open, FaceKind::Open)
        };
        faces.push((Face { mode: k, axis: 0, side: Side::Lo }, lo));
        faces.push((Face { mode: k, axis: 0, side: Side::Hi }, hi));
    }
    let vel = velocities.clone();
    let atlas = BoundaryAtlas::build(&grid, &faces, &flow, &|x, _| vel[x.mode].abs());

    let wall_of = |z: &StatePoint| z.coords[0] > 0.5 * p.length;
    let plus_points: Vec<StatePoint> = atlas.plus().iter().map(|c| c.point.clone()).collect();
    let minus_points: Vec<StatePoint> = atlas.minus().iter().map(|c| c.point.clone()).collect();
    let transfer: Vec<Vec<f64>> = match &p.wall {
        WallOperator::Specular => plus_points
            .iter()
            .map(|z| {
                let v = velocities[z.mode];
                let target = minus_points.iter().position(|w| wall_of(w) == wall_of(z) && velocities[w.mode] == -v);
                match target {
                    Some(j) => {
                        let mut row = vec![0.0; minus_points.len()];
                        row[j] = 1.0;
                        Ok(row)
                    }
                    None => Err(Error::InvalidParameter(format!("specular walls need velocity {} in the set", -v))),
                }
            })
            .collect::<Result<_>>()?,
        WallOperator::Diffuse => plus_points
            .iter()
            .map(|z| {
                let same: Vec<f64> = atlas
                    .minus()
                    .iter()
                    .map(|c| if wall_of(&c.point) == wall_of(z) { c.weight } else { 0.0 })
                    .collect();
                let total: f64 = same.iter().sum();
                if total > 0.0 {
                    Ok(same.iter().map(|w| w / total).collect())
                } else {
                    Err(Error::InvalidParameter("diffuse wall without incoming velocities".into()))
                }
            })
            .collect::<Result<_>>()?,
        WallOperator::Matrix(h) => {
            if h.len() != plus_points.len() || h.iter().any(|r| r.len() != minus_points.len()) {
                return Err(Error::InvalidParameter("wall matrix must be (outgoing cells) × (incoming cells)".into()));
            }
            h.clone()
        }
    };
    if transfer.iter().flatten().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidParameter("wall operator must be nonnegative".into()));
    }
    let norm = transfer.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
    if !transfer.is_empty() && (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("wall operator must have norm 1, got {norm}")));
    }

    let rates: Vec<f64> = (0..nv).map(|k| p.collision_rate(k)).collect();
    let collide: Vec<Vec<f64>> = (0..nv).map(|pre| (0..nv).map(|post| p.kernel(post, pre) * weights[post]).collect()).collect();
    let gain: Vec<Vec<f64>> = (0..nv)
        .map(|post| (0..nv).map(|pre| if rates[pre] > 0.0 { p.kernel(post, pre) / rates[pre] } else { 0.0 }).collect())
        .collect();
    let vmax = velocities.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let step = if vmax > 0.0 { 0.5 * grid.min_width() / vmax } else { 0.25 };
    let rate_fn = rates.clone();
    let hazard_rates = rates.clone();
    PdmpModel::new(ModelParts {
        name: "kinetic_slab".into(),
        modes: (0..nv).map(|k| ModeSpec { name: format!("v={}", velocities[k]), dim: 1 }).collect(),
        flow: Arc::new(flow),
        rate: Arc::new(move |x| rate_fn[x.mode]),
        cumulative_hazard: Some(Arc::new(move |x, t| hazard_rates[x.mode] * t)),
        jump: Arc::new(SlabJump { collide, gain, weights: weights.clone(), transfer, plus_points, minus_points }),
        mesh: Mesh { grid, atlas },
        numerics: Numerics::with_step(step),
        parameters: json!({
            "length": p.length,
            "velocities": velocities,
            "weights": weights,
            "collision_rates": rates,
            "wall": format!("{:?}", p.wall).split('(').next().unwrap_or("").to_string(),
            "cells": p.cells,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_rng;

    #[test]
    fn boundary_weights_are_speed_times_nu() {
        let p = KineticSlabParams { velocities: vec![(2.0, 0.3), (-1.0, 0.7)], wall: WallOperator::Diffuse, ..KineticSlabParams::two_speed(10) };
        let m = build_kinetic_slab(&p).unwrap();
        let plus = m.atlas().plus();
        assert_eq!(plus.len(), 2);
        assert!((plus[0].weight - 0.6).abs() < 1e-15);
        assert_eq!(plus[0].point.coords[0], 1.0);
        assert!((plus[1].weight - 0.7).abs() < 1e-15);
        assert_eq!(plus[1].point.coords[0], 0.0);
    }

    #[test]
    fn specular_reflection_sample() {
        let m = build_kinetic_slab(&KineticSlabParams::two_speed(10)).unwrap();
        let mut rng = path_rng(1, 0);
        let post = m.jump().sample(&StatePoint::new(&[1.0], 0), &mut rng);
        assert_eq!(post, StatePoint::new(&[1.0], 1));
        assert_eq!(m.classify(&post), Location::Incoming);
    }

    #[test]
    fn wall_operator_norm_is_checked() {
        let p = KineticSlabParams { wall: WallOperator::Matrix(vec![vec![0.0, 1.2], vec![1.0, 0.0]]), ..KineticSlabParams::two_speed(4) };
        assert!(build_kinetic_slab(&p).is_err());
    }

    #[test]
    fn collisions_conserve_mass() {
        let p = KineticSlabParams {
            velocities: vec![(1.0, 0.25), (0.5, 0.25), (-0.5, 0.25), (-1.0, 0.25)],
            collision: Collision::Isotropic { rate: 2.0 },
            wall: WallOperator::Diffuse,
            ..KineticSlabParams::two_speed(8)
        };
        let m = build_kinetic_slab(&p).unwrap();
        let n = m.grid().n_cells();
        let a: Vec<f64> = (0..n).map(|i| (i % 5) as f64).collect();
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let out0 = m.jump().p0_apply(m.mesh(), &a, &b);
        let out1 = m.jump().p_partial_apply(m.mesh(), &a, &b);
        let bmass: f64 = b.iter().zip(m.atlas().plus()).map(|(v, c)| v * c.weight).sum();
        let omass: f64 = out1.iter().zip(m.atlas().minus()).map(|(v, c)| v * c.weight).sum();
        assert!((m.grid().mass(&out0) - m.grid().mass(&a)).abs() < 1e-12);
        assert!((omass - bmass).abs() < 1e-12);
        assert_eq!(m.rate(&StatePoint::new(&[0.5], 2)), 2.0);
    }
}
