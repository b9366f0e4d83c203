//! Models on a line: constant drift, constant jump rate, uniform restart.

use crate::model::*;
use crate::error::{Error, Result};
use rand::{Rng, RngCore};
use serde_json::json;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub enum LineDomain {
    /// The open interval (lo, hi); with nonzero velocity its ends are Γ⁻ and Γ⁺.
    Interval { lo: f64, hi: f64 },
    /// The whole line, discretized on a window.
    Line { window_lo: f64, window_hi: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineParams {
    pub velocity: f64,
    pub domain: LineDomain,
    /// Constant jump rate.
    pub rate: f64,
    /// Post-jump law is uniform on this interval.
    pub restart: (f64, f64),
    pub cells: usize,
}

impl LineParams {
    /// ẋ = 1 on (0,1), no rate, uniform restart from the right end.
    pub fn drift_redistribute(cells: usize) -> Self {
        Self { velocity: 1.0, domain: LineDomain::Interval { lo: 0.0, hi: 1.0 }, rate: 0.0, restart: (0.0, 1.0), cells }
    }

    /// ẋ = 1 on ℝ without jumps, gridded on [-2, 8].
    pub fn free_flow(cells: usize) -> Self {
        Self {
            velocity: 1.0,
            domain: LineDomain::Line { window_lo: -2.0, window_hi: 8.0 },
            rate: 0.0,
            restart: (0.0, 1.0),
            cells,
        }
    }

    /// Static state on (0,1) jumping at rate `q` to Uniform(0,1).
    pub fn constant_rate(q: f64, cells: usize) -> Self {
        Self { velocity: 0.0, domain: LineDomain::Interval { lo: 0.0, hi: 1.0 }, rate: q, restart: (0.0, 1.0), cells }
    }
}

pub fn drift_redistribute(cells: usize) -> PdmpModel {
    build_drift_redistribute(&LineParams::drift_redistribute(cells)).expect("default parameters are valid")
}

pub fn free_flow(cells: usize) -> PdmpModel {
    build_drift_redistribute(&LineParams::free_flow(cells)).expect("default parameters are valid")
}

pub fn constant_rate_jumper(q: f64, cells: usize) -> PdmpModel {
    build_drift_redistribute(&LineParams::constant_rate(q, cells)).expect("default parameters are valid")
}

struct LineFlow {
    v: f64,
    domain: LineDomain,
}

impl FlowMap for LineFlow {
    fn phi(&self, t: f64, x: &StatePoint) -> StatePoint {
        StatePoint::new(&[x.coords[0] + self.v * t], x.mode)
    }

    fn jac(&self, _t: f64, _x: &StatePoint) -> f64 {
        1.0
    }

    fn hit_plus(&self, x: &StatePoint) -> f64 {
        match self.domain {
            LineDomain::Interval { hi, .. } if self.v > 0.0 => ((hi - x.coords[0]) / self.v).max(0.0),
            LineDomain::Interval { lo, hi: _ } if self.v < 0.0 => ((x.coords[0] - lo) / -self.v).max(0.0),
            _ => f64::INFINITY,
        }
    }

    fn hit_minus(&self, x: &StatePoint) -> f64 {
        match self.domain {
            LineDomain::Interval { lo, hi: _ } if self.v > 0.0 => ((x.coords[0] - lo) / self.v).max(0.0),
            LineDomain::Interval { lo: _, hi } if self.v < 0.0 => ((hi - x.coords[0]) / -self.v).max(0.0),
            _ => f64::INFINITY,
        }
    }

    fn divergence(&self, _x: &StatePoint) -> Option<f64> {
        Some(0.0)
    }

    fn contains(&self, x: &StatePoint) -> bool {
        match self.domain {
            LineDomain::Interval { lo, hi } => x.coords[0] >= lo && x.coords[0] <= hi,
            LineDomain::Line { .. } => x.coords[0].is_finite(),
        }
    }
}

struct UniformRestart {
    lo: f64,
    hi: f64,
}

impl JumpLaw for UniformRestart {
    fn sample(&self, _from: &StatePoint, rng: &mut dyn RngCore) -> StatePoint {
        let u: f64 = rng.random();
        StatePoint::scalar(self.lo + (self.hi - self.lo) * u)
    }

    fn p0_apply(&self, mesh: &Mesh, rate_part: &[f64], outflux: &[f64]) -> Vec<f64> {
        let grid = &mesh.grid;
        let mass = grid.mass(rate_part) + outflux.iter().zip(mesh.atlas.plus()).map(|(b, c)| b * c.weight).sum::<f64>();
        let mg = grid.mode(0);
        let axis = &mg.axes[0];
        let mut out = vec![0.0; grid.n_cells()];
        for (i, len) in axis.overlaps(self.lo, self.hi) {
            out[i] = mass * len / (self.hi - self.lo) / (axis.width(i) * mg.weight);
        }
        out
    }

    fn p_partial_apply(&self, mesh: &Mesh, _rate_part: &[f64], _outflux: &[f64]) -> Vec<f64> {
        vec![0.0; mesh.atlas.minus().len()]
    }
}

/// Builds a line model. With the default parameters this is the
/// drift–redistribute process on (0,1); [`LineParams::free_flow`] and
/// [`LineParams::constant_rate`] give the other two line models.
pub fn build_drift_redistribute(p: &LineParams) -> Result<PdmpModel> {
    if p.cells == 0 || !p.velocity.is_finite() || !(p.rate >= 0.0) || !p.rate.is_finite() {
        return Err(Error::InvalidParameter("line model needs cells > 0, finite velocity, rate ≥ 0".into()));
    }
    let (lo, hi) = match p.domain {
        LineDomain::Interval { lo, hi } => (lo, hi),
        LineDomain::Line { window_lo, window_hi } => (window_lo, window_hi),
    };
    if !(hi > lo) {
        return Err(Error::InvalidParameter("domain must have hi > lo".into()));
    }
    let (a, b) = p.restart;
    if !(b > a) {
        return Err(Error::InvalidParameter("restart interval must have positive length".into()));
    }
    if let LineDomain::Interval { lo, hi } = p.domain {
        if a < lo || b > hi {
            return Err(Error::InvalidParameter("restart interval must lie in the domain".into()));
        }
    }
    let grid = InteriorGrid::new(vec![ModeGrid::new(0, 1, vec![Axis::uniform(0, lo, hi, p.cells)], vec![], 1.0)]);
    let flow = LineFlow { v: p.velocity, domain: p.domain.clone() };
    let bounded = matches!(p.domain, LineDomain::Interval { .. });
    let (lo_kind, hi_kind) = if !bounded || p.velocity == 0.0 {
        (FaceKind::Open, FaceKind::Open)
    } else if p.velocity > 0.0 {
        (FaceKind::Incoming, FaceKind::Outgoing)
    } else {
        (FaceKind::Outgoing, FaceKind::Incoming)
    };
    let faces = [
        (Face { mode: 0, axis: 0, side: Side::Lo }, lo_kind),
        (Face { mode: 0, axis: 0, side: Side::Hi }, hi_kind),
    ];
    let speed = p.velocity.abs();
    let atlas = BoundaryAtlas::build(&grid, &faces, &flow, &|_, _| speed);
    let step = if speed > 0.0 { 0.5 * grid.min_width() / speed } else { 0.25 };
    let q = p.rate;
    let name = match (bounded, p.velocity == 0.0) {
        (true, false) => "drift_redistribute",
        (false, _) => "free_flow",
        (true, true) => "constant_rate",
    };
    PdmpModel::new(ModelParts {
        name: name.into(),
        modes: vec![ModeSpec { name: "line".into(), dim: 1 }],
        flow: Arc::new(flow),
        rate: Arc::new(move |_| q),
        cumulative_hazard: Some(Arc::new(move |_, t| q * t)),
        jump: Arc::new(UniformRestart { lo: a, hi: b }),
        mesh: Mesh { grid, atlas },
        numerics: Numerics::with_step(step),
        parameters: json!({
            "velocity": p.velocity,
            "domain": [lo, hi],
            "bounded": bounded,
            "rate": p.rate,
            "restart": [a, b],
            "cells": p.cells,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Direction;

    #[test]
    fn drift_redistribute_geometry() {
        let m = drift_redistribute(100);
        let x = StatePoint::scalar(0.25);
        assert_eq!(m.hitting_time(&x, Direction::Forward), 0.75);
        assert_eq!(m.hitting_time(&StatePoint::scalar(0.3), Direction::Backward), 0.3);
        assert_eq!(m.atlas().plus().len(), 1);
        assert_eq!(m.atlas().plus()[0].weight, 1.0);
        assert_eq!(m.atlas().minus()[0].weight, 1.0);
        assert_eq!(m.atlas().plus()[0].lifetime, 1.0);
        assert_eq!(m.classify(&StatePoint::scalar(1.0)), Location::Outgoing);
        assert_eq!(m.classify(&StatePoint::scalar(0.0)), Location::Incoming);
    }

    #[test]
    fn advance_examples() {
        let m2 = free_flow(100);
        assert_eq!(m2.advance(&StatePoint::scalar(0.0), 2.5).unwrap(), Advance::Inside(StatePoint::scalar(2.5)));
        let m1 = drift_redistribute(100);
        match m1.advance(&StatePoint::scalar(0.3), 1.0).unwrap() {
            Advance::Boundary { point, outgoing, time } => {
                assert_eq!(point.coords[0], 1.0);
                assert!(outgoing);
                assert!((time - 0.7).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(m1.advance(&StatePoint::scalar(0.3), f64::NAN).is_err());
        assert!(m1.advance(&StatePoint::new(&[0.3], 4), 0.1).is_err());
    }

    #[test]
    fn free_flow_never_hits() {
        let m = free_flow(10);
        assert_eq!(m.hitting_time(&StatePoint::scalar(3.0), Direction::Forward), f64::INFINITY);
        assert_eq!(m.hitting_time(&StatePoint::scalar(3.0), Direction::Backward), f64::INFINITY);
        assert!(m.atlas().plus().is_empty());
    }

    #[test]
    fn restart_is_mass_preserving() {
        let m = drift_redistribute(50);
        let out = m.jump().p0_apply(m.mesh(), &vec![0.0; 50], &[2.0]);
        assert!((m.grid().mass(&out) - 2.0).abs() < 1e-13);
        assert!(out.iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn constant_rate_hazard() {
        let m = constant_rate_jumper(3.0, 10);
        assert!((m.hazard_integral(&StatePoint::scalar(0.5), 0.4).unwrap() - 1.2).abs() < 1e-15);
    }
}
