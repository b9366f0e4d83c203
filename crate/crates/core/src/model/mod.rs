//! State space, characteristics and grids of a PDMP.

mod boundary;
mod density;
mod flow;
mod grid;
mod jump;
mod state;

pub use boundary::{BoundaryAtlas, BoundaryCell, Face, FaceInfo, FaceKind, Side};
pub use density::{BoundaryDensity, DensityPair, GridDensity};
pub use flow::{FlowMap, OdeFlow, ScalarField, VectorField};
pub use grid::{multilinear, Axis, InteriorGrid, ModeGrid, BOX_TOL};
pub use jump::JumpLaw;
pub use state::{Coords, Location, ModeSpec, StatePoint};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use std::sync::Arc;

pub type RateFn = Arc<dyn Fn(&StatePoint) -> f64 + Send + Sync>;
pub type HazardFn = Arc<dyn Fn(&StatePoint, f64) -> f64 + Send + Sync>;

/// Interior grid plus boundary atlas.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub grid: InteriorGrid,
    pub atlas: BoundaryAtlas,
}

/// Numerical controls shared by the solvers.
#[derive(Clone, Debug)]
pub struct Numerics {
    /// Maximal step along characteristics.
    pub quad_step: f64,
    /// Relative tolerance of hazard quadrature.
    pub hazard_rtol: f64,
    /// Time tolerance of root finding.
    pub root_tol: f64,
    /// Backward integrals still growing at this time are declared divergent.
    pub horizon: f64,
    /// Discount exponent beyond which contributions are dropped.
    pub cutoff: f64,
    /// Maximal increase of the discount exponent per quadrature step.
    pub max_exponent_step: f64,
}

impl Numerics {
    pub fn with_step(quad_step: f64) -> Self {
        Self {
            quad_step,
            hazard_rtol: 1e-8,
            root_tol: 1e-10,
            horizon: 1e6,
            cutoff: 40.0,
            max_exponent_step: 0.25,
        }
    }
}

/// Result of moving along the flow.
#[derive(Clone, Debug, PartialEq)]
pub enum Advance {
    /// The segment stays inside.
    Inside(StatePoint),
    /// The segment reaches the boundary after `time`; `outgoing` marks Γ⁺.
    Boundary { point: StatePoint, outgoing: bool, time: f64 },
    /// The flow left the chart.
    OutOfDomain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Components of a model, consumed by [`PdmpModel::new`].
pub struct ModelParts {
    pub name: String,
    pub modes: Vec<ModeSpec>,
    pub flow: Arc<dyn FlowMap>,
    pub rate: RateFn,
    pub cumulative_hazard: Option<HazardFn>,
    pub jump: Arc<dyn JumpLaw>,
    pub mesh: Mesh,
    pub numerics: Numerics,
    pub parameters: serde_json::Value,
}

/// Immutable bundle of characteristics, grids and numerical controls.
#[derive(Clone)]
pub struct PdmpModel {
    name: String,
    modes: Vec<ModeSpec>,
    flow: Arc<dyn FlowMap>,
    rate: RateFn,
    cumulative_hazard: Option<HazardFn>,
    jump: Arc<dyn JumpLaw>,
    mesh: Mesh,
    numerics: Numerics,
    parameters: serde_json::Value,
}

impl std::fmt::Debug for PdmpModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PdmpModel")
            .field("name", &self.name)
            .field("modes", &self.modes)
            .field("cells", &self.mesh.grid.n_cells())
            .finish()
    }
}

/// Time tolerance below which a hitting time counts as zero.
const HIT_EPS: f64 = 1e-9;

impl PdmpModel {
    /// Validates and assembles a model.
    ///
    /// Assumed, not checked: the boundary of the state space is null for the
    /// reference measure, and the measure is Radon.
    pub fn new(parts: ModelParts) -> Result<Self> {
        if parts.mesh.grid.modes().len() != parts.modes.len() {
            return Err(Error::InvalidParameter("one mode grid per declared mode is required".into()));
        }
        for c in 0..parts.mesh.grid.n_cells() {
            let r = (parts.rate)(&parts.mesh.grid.center(c));
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("jump rate {r} at cell {c} is not finite and nonnegative")));
            }
        }
        for cell in parts.mesh.atlas.minus().iter().chain(parts.mesh.atlas.plus()) {
            if !(cell.weight > 0.0 && cell.weight.is_finite()) {
                return Err(Error::InvalidParameter(format!("boundary weight {} is not positive", cell.weight)));
            }
        }
        Ok(Self {
            name: parts.name,
            modes: parts.modes,
            flow: parts.flow,
            rate: parts.rate,
            cumulative_hazard: parts.cumulative_hazard,
            jump: parts.jump,
            mesh: parts.mesh,
            numerics: parts.numerics,
            parameters: parts.parameters,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parameters(&self) -> &serde_json::Value {
        &self.parameters
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn flow(&self) -> &dyn FlowMap {
        self.flow.as_ref()
    }

    pub fn jump(&self) -> &dyn JumpLaw {
        self.jump.as_ref()
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn grid(&self) -> &InteriorGrid {
        &self.mesh.grid
    }

    pub fn atlas(&self) -> &BoundaryAtlas {
        &self.mesh.atlas
    }

    pub fn numerics(&self) -> &Numerics {
        &self.numerics
    }

    pub fn with_numerics(mut self, numerics: Numerics) -> Self {
        self.numerics = numerics;
        self
    }

    pub fn has_cumulative_hazard(&self) -> bool {
        self.cumulative_hazard.is_some()
    }

    /// Jump rate ϑ(x).
    pub fn rate(&self, x: &StatePoint) -> f64 {
        (self.rate)(x)
    }

    pub fn check_state(&self, x: &StatePoint) -> Result<()> {
        let spec = self.modes.get(x.mode).ok_or(Error::UnknownMode { mode: x.mode, modes: self.modes.len() })?;
        if spec.dim != x.dim() {
            return Err(Error::DimensionMismatch { mode: x.mode, expected: spec.dim, got: x.dim() });
        }
        Ok(())
    }

    /// Where `x` lies relative to E, Γ⁻ and Γ⁺.
    pub fn classify(&self, x: &StatePoint) -> Location {
        if self.check_state(x).is_err() || !self.flow.contains(x) {
            return Location::Outside;
        }
        if self.flow.hit_plus(x) <= HIT_EPS {
            Location::Outgoing
        } else if self.flow.hit_minus(x) <= HIT_EPS {
            Location::Incoming
        } else {
            Location::Interior
        }
    }

    /// Whether `x` belongs to E = E⁰ ∪ Γ⁻ \ Γ⁺.
    pub fn in_state_space(&self, x: &StatePoint) -> bool {
        matches!(self.classify(x), Location::Interior | Location::Incoming)
    }

    /// Moves `x` along the flow for signed time `t`, stopping at the boundary.
    pub fn advance(&self, x: &StatePoint, t: f64) -> Result<Advance> {
        if !t.is_finite() {
            return Err(Error::NonFiniteTime(t));
        }
        self.check_state(x)?;
        if t >= 0.0 {
            let tp = self.flow.hit_plus(x);
            if t >= tp {
                return Ok(Advance::Boundary { point: self.flow.phi(tp, x), outgoing: true, time: tp });
            }
        } else {
            let tm = self.flow.hit_minus(x);
            if -t >= tm {
                return Ok(Advance::Boundary { point: self.flow.phi(-tm, x), outgoing: false, time: tm });
            }
        }
        let y = self.flow.phi(t, x);
        if self.flow.contains(&y) {
            Ok(Advance::Inside(y))
        } else {
            Ok(Advance::OutOfDomain)
        }
    }

    /// Cocycle J_t(x).
    pub fn cocycle(&self, x: &StatePoint, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFiniteTime(t));
        }
        self.check_state(x)?;
        Ok(self.flow.jac(t, x))
    }

    /// t₊(x) or t₋(x).
    pub fn hitting_time(&self, x: &StatePoint, direction: Direction) -> f64 {
        match direction {
            Direction::Forward => self.flow.hit_plus(x),
            Direction::Backward => self.flow.hit_minus(x),
        }
    }

    /// ∫₀ᵗ ϑ(φ_r(x)) dr.
    pub fn hazard_integral(&self, x: &StatePoint, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFiniteTime(t));
        }
        if t <= 0.0 {
            return Ok(0.0);
        }
        if let Some(h) = &self.cumulative_hazard {
            return Ok(h(x, t));
        }
        adaptive_simpson(|r| (self.rate)(&self.flow.phi(r, x)), 0.0, t, self.numerics.hazard_rtol)
    }

    /// ∫₀ᵗ ϑ(φ₋ᵣ(x)) dr, the hazard accumulated along the backward orbit.
    pub fn backward_hazard(&self, x: &StatePoint, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        self.hazard_integral(&self.flow.phi(-t, x), t)
    }
}
