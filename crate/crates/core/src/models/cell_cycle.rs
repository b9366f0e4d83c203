//! Two-phase cell cycle.
//!
//! Mode 0 (phase I): state `(x, 0)`, size grows by `x' = g(x)`, phase II is
//! entered at rate `φ(x)`. Mode 1 (phase II): state `(x, y)` with `y' = 1`;
//! at `y = T_II` the cell divides into `(x/2, 0)` in phase I.
//!
//! Besides the PDMP itself the module provides the size-only operator P₁
//! whose fixed points are the phase-I marginals of the jump-chain invariant
//! densities, and the lift of such a fixed point to the full state space.
//! P₁ and the lift are computed from the closed cumulative forms
//! `∫ P₁f₁ = Λ₁∘λ − ω∘λ` and `∫ f_∂ = Λ₁ − ω`, where `Λ₁` is the cumulative
//! mass of `f₁` and `ω(u) = ∫₀ᵘ e^{Q(z)−Q(u)} f₁(z) dz`, so both conserve mass
//! to rounding.

use crate::error::{Error, Result};
use crate::model::*;
use crate::quadrature::{adaptive_simpson, gauss_legendre, gauss_legendre_composite};
use rand::RngCore;
use serde_json::json;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Growth rate `g` of the size.
#[derive(Clone)]
pub enum GrowthLaw {
    /// `g ≡ a`.
    Constant(f64),
    /// `g(x) = a x`.
    Linear(f64),
    /// General `g`; optionally with `(𝔊, 𝔊⁻¹)` where `𝔊' = 1/g`. Without it
    /// the size flow is integrated by RK4.
    Custom { rate: ScalarFn, antiderivative: Option<(ScalarFn, ScalarFn)> },
}

/// Phase-II entry rate `φ`.
#[derive(Clone)]
pub enum EntryRate {
    /// `φ ≡ c`.
    Constant(f64),
    /// `φ(x) = c x`.
    Linear(f64),
    /// General `φ`; optionally with `Q` where `Q' = φ/g`.
    Custom { rate: ScalarFn, hazard_antiderivative: Option<ScalarFn> },
}

#[derive(Clone)]
pub struct CellCycleParams {
    pub growth: GrowthLaw,
    pub entry: EntryRate,
    /// Duration of phase II.
    pub t_two: f64,
    /// Size grid is (0, x_max).
    pub x_max: f64,
    pub size_cells: usize,
    pub phase_two_cells: usize,
    /// RK4 step for custom growth laws without antiderivative.
    pub rk4_step: f64,
}

impl std::fmt::Debug for CellCycleParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CellCycleParams({})", self.describe())
    }
}

impl CellCycleParams {
    /// `g ≡ 1`, `φ ≡ 1`, `T_II = 1` on (0, 20) with 0.05 cells.
    pub fn toy() -> Self {
        Self {
            growth: GrowthLaw::Constant(1.0),
            entry: EntryRate::Constant(1.0),
            t_two: 1.0,
            x_max: 20.0,
            size_cells: 400,
            phase_two_cells: 20,
            rk4_step: 1e-3,
        }
    }

    /// Toy parameters on a grid with equal size and age steps `h`.
    pub fn toy_with_step(x_max: f64, h: f64) -> Self {
        Self { x_max, size_cells: (x_max / h).round() as usize, phase_two_cells: (1.0 / h).round() as usize, ..Self::toy() }
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let mut p = Self::toy();
        let num = |k: &str| v.get(k).and_then(|x| x.as_f64());
        let a = num("growth_rate").unwrap_or(1.0);
        let c = num("entry_rate").unwrap_or(1.0);
        p.growth = match v.get("growth").and_then(|x| x.as_str()).unwrap_or("constant") {
            "constant" => GrowthLaw::Constant(a),
            "linear" => GrowthLaw::Linear(a),
            other => return Err(Error::Config(format!("unknown growth law `{other}`"))),
        };
        p.entry = match v.get("entry").and_then(|x| x.as_str()).unwrap_or("constant") {
            "constant" => EntryRate::Constant(c),
            "linear" => EntryRate::Linear(c),
            other => return Err(Error::Config(format!("unknown entry rate `{other}`"))),
        };
        if let Some(t) = num("t_two") {
            p.t_two = t;
        }
        if let Some(x) = num("x_max") {
            p.x_max = x;
        }
        if let Some(n) = v.get("size_cells").and_then(|x| x.as_u64()) {
            p.size_cells = n as usize;
        }
        if let Some(n) = v.get("phase_two_cells").and_then(|x| x.as_u64()) {
            p.phase_two_cells = n as usize;
        }
        Ok(p)
    }

    fn describe(&self) -> String {
        let g = match &self.growth {
            GrowthLaw::Constant(a) => format!("g={a}"),
            GrowthLaw::Linear(a) => format!("g={a}x"),
            GrowthLaw::Custom { .. } => "g=custom".into(),
        };
        let e = match &self.entry {
            EntryRate::Constant(c) => format!("phi={c}"),
            EntryRate::Linear(c) => format!("phi={c}x"),
            EntryRate::Custom { .. } => "phi=custom".into(),
        };
        format!("{g}, {e}, T_II={}, x_max={}", self.t_two, self.x_max)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_two > 0.0) || !(self.x_max > 0.0) || self.size_cells < 2 || self.phase_two_cells < 2 {
            return Err(Error::InvalidParameter("cell cycle needs T_II > 0, x_max > 0 and at least two cells per axis".into()));
        }
        match self.growth {
            GrowthLaw::Constant(a) | GrowthLaw::Linear(a) if !(a > 0.0) => {
                return Err(Error::InvalidParameter("growth rate must be positive".into()))
            }
            _ => {}
        }
        match self.entry {
            EntryRate::Constant(c) | EntryRate::Linear(c) if !(c >= 0.0) => {
                return Err(Error::InvalidParameter("entry rate must be nonnegative".into()))
            }
            _ => {}
        }
        let axis = self.size_axis();
        for i in 0..=axis.len() {
            let x = axis.edges()[i].max(0.5 * axis.width(0));
            if !(self.g(x) > 0.0) || !(self.phi(x) >= 0.0) {
                return Err(Error::InvalidParameter(format!("g must be positive and φ nonnegative on the grid (x = {x})")));
            }
        }
        Ok(())
    }

    pub fn size_axis(&self) -> Axis {
        Axis::uniform(0, 0.0, self.x_max, self.size_cells)
    }

    /// Growth rate g(x).
    pub fn g(&self, x: f64) -> f64 {
        match &self.growth {
            GrowthLaw::Constant(a) => *a,
            GrowthLaw::Linear(a) => a * x,
            GrowthLaw::Custom { rate, .. } => rate(x),
        }
    }

    /// Entry rate φ(x), zero for x ≤ 0.
    pub fn phi(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match &self.entry {
            EntryRate::Constant(c) => *c,
            EntryRate::Linear(c) => c * x,
            EntryRate::Custom { rate, .. } => rate(x),
        }
    }

    /// Size flow φ¹_t(x).
    pub fn size_flow(&self, t: f64, x: f64) -> f64 {
        match &self.growth {
            GrowthLaw::Constant(a) => x + a * t,
            GrowthLaw::Linear(a) => x * (a * t).exp(),
            GrowthLaw::Custom { antiderivative: Some((big_g, inv)), .. } => inv(big_g(x) + t),
            GrowthLaw::Custom { rate, antiderivative: None } => {
                if t == 0.0 {
                    return x;
                }
                let n = (t.abs() / self.rk4_step).ceil().max(1.0) as usize;
                let h = t / n as f64;
                let mut y = x;
                for _ in 0..n {
                    let k1 = rate(y);
                    let k2 = rate(y + 0.5 * h * k1);
                    let k3 = rate(y + 0.5 * h * k2);
                    let k4 = rate(y + h * k3);
                    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
                y
            }
        }
    }

    /// Closed-form Q = ∫ φ/g when available.
    fn q_closed(&self) -> Option<ScalarFn> {
        use EntryRate as E;
        use GrowthLaw as G;
        match (&self.growth, &self.entry) {
            (_, E::Custom { hazard_antiderivative: Some(q), .. }) => Some(q.clone()),
            (G::Constant(a), E::Constant(c)) => {
                let k = c / a;
                Some(Arc::new(move |x| k * x))
            }
            (G::Constant(a), E::Linear(c)) => {
                let k = c / (2.0 * a);
                Some(Arc::new(move |x| k * x * x))
            }
            (G::Linear(a), E::Constant(c)) => {
                let k = c / a;
                Some(Arc::new(move |x: f64| if x > 0.0 { k * x.ln() } else { f64::NEG_INFINITY }))
            }
            (G::Linear(a), E::Linear(c)) => {
                let k = c / a;
                Some(Arc::new(move |x| k * x))
            }
            _ => None,
        }
    }

    /// Q(x) = ∫_{x̄}^x φ/g with x̄ = 1 (only differences of Q matter).
    pub fn q(&self, x: f64) -> f64 {
        match self.q_closed() {
            Some(q) => q(x),
            None => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                adaptive_simpson(|s| self.phi(s) / self.g(s), 1.0, x, 1e-12).unwrap_or(f64::NAN)
            }
        }
    }

    /// Newborn-size map λ(x) = φ¹_{−T_II}(2x).
    pub fn newborn(&self, x: f64) -> f64 {
        self.size_flow(-self.t_two, 2.0 * x)
    }
}

struct CellCycleFlow {
    p: CellCycleParams,
}

impl FlowMap for CellCycleFlow {
    fn phi(&self, t: f64, x: &StatePoint) -> StatePoint {
        let size = self.p.size_flow(t, x.coords[0]);
        let y = if x.mode == 1 { x.coords[1] + t } else { x.coords[1] };
        StatePoint::new(&[size, y], x.mode)
    }

    fn jac(&self, t: f64, x: &StatePoint) -> f64 {
        self.p.g(self.p.size_flow(t, x.coords[0])) / self.p.g(x.coords[0])
    }

    fn hit_plus(&self, x: &StatePoint) -> f64 {
        if x.mode == 1 {
            (self.p.t_two - x.coords[1]).max(0.0)
        } else {
            f64::INFINITY
        }
    }

    fn hit_minus(&self, x: &StatePoint) -> f64 {
        if x.mode == 1 {
            x.coords[1].max(0.0)
        } else {
            f64::INFINITY
        }
    }

    fn divergence(&self, x: &StatePoint) -> Option<f64> {
        match &self.p.growth {
            GrowthLaw::Constant(_) => Some(0.0),
            GrowthLaw::Linear(a) => Some(*a),
            GrowthLaw::Custom { .. } => None,
        }
        .map(|d| d + 0.0 * x.coords[0])
    }

    fn contains(&self, x: &StatePoint) -> bool {
        x.coords[0] > 0.0
            && match x.mode {
                0 => x.coords[1] == 0.0,
                1 => x.coords[1] >= 0.0 && x.coords[1] <= self.p.t_two,
                _ => false,
            }
    }
}

struct CellCycleJump;

impl JumpLaw for CellCycleJump {
    fn sample(&self, from: &StatePoint, _rng: &mut dyn RngCore) -> StatePoint {
        match from.mode {
            0 => StatePoint::new(&[from.coords[0], 0.0], 1),
            _ => StatePoint::new(&[0.5 * from.coords[0], 0.0], 0),
        }
    }

    fn p0_apply(&self, mesh: &Mesh, _rate_part: &[f64], outflux: &[f64]) -> Vec<f64> {
        let grid = &mesh.grid;
        let axis = &grid.mode(0).axes[0];
        let mut out = vec![0.0; grid.n_cells()];
        for (b, cell) in outflux.iter().zip(mesh.atlas.plus()) {
            if *b == 0.0 {
                continue;
            }
            let (lo, hi) = (0.5 * cell.tangent_lo[0], 0.5 * cell.tangent_hi[0]);
            let mass = b * cell.weight;
            for (i, len) in axis.overlaps(lo, hi) {
                out[i] += mass * len / (hi - lo) / axis.width(i);
            }
        }
        out
    }

    fn p_partial_apply(&self, mesh: &Mesh, rate_part: &[f64], _outflux: &[f64]) -> Vec<f64> {
        let axis = &mesh.grid.mode(0).axes[0];
        mesh.atlas
            .minus()
            .iter()
            .map(|cell| {
                let mass: f64 = axis
                    .overlaps(cell.tangent_lo[0], cell.tangent_hi[0])
                    .iter()
                    .map(|&(i, len)| rate_part[i] * len)
                    .sum();
                mass / cell.weight
            })
            .collect()
    }
}

/// Builds the two-phase cell cycle PDMP.
pub fn build_cell_cycle(p: &CellCycleParams) -> Result<PdmpModel> {
    p.validate()?;
    let size = p.size_axis();
    let age = Axis::uniform(1, 0.0, p.t_two, p.phase_two_cells);
    let grid = InteriorGrid::new(vec![
        ModeGrid::new(0, 2, vec![size.clone()], vec![(1, 0.0)], 1.0),
        ModeGrid::new(1, 2, vec![size.clone(), age.clone()], vec![], 1.0),
    ]);
    let flow = CellCycleFlow { p: p.clone() };
    let face = |mode, axis, side| Face { mode, axis, side };
    let faces = [
        (face(0, 0, Side::Lo), FaceKind::Open),
        (face(0, 0, Side::Hi), FaceKind::Open),
        (face(1, 0, Side::Lo), FaceKind::Open),
        (face(1, 0, Side::Hi), FaceKind::Open),
        (face(1, 1, Side::Lo), FaceKind::Incoming),
        (face(1, 1, Side::Hi), FaceKind::Outgoing),
    ];
    let atlas = BoundaryAtlas::build(&grid, &faces, &flow, &|_, _| 1.0);
    let gmax = (0..size.len()).map(|i| p.g(size.center(i))).fold(0.0f64, f64::max);
    let step = 0.5 * (size.min_width() / gmax).min(age.min_width());
    let rate_p = p.clone();
    let cumulative: Option<HazardFn> = p.q_closed().map(|q| {
        let hp = p.clone();
        Arc::new(move |x: &StatePoint, t: f64| {
            if x.mode != 0 || x.coords[0] <= 0.0 {
                0.0
            } else {
                (q(hp.size_flow(t, x.coords[0])) - q(x.coords[0])).max(0.0)
            }
        }) as HazardFn
    });
    PdmpModel::new(ModelParts {
        name: "cell_cycle".into(),
        modes: vec![ModeSpec { name: "phase I".into(), dim: 2 }, ModeSpec { name: "phase II".into(), dim: 2 }],
        flow: Arc::new(flow),
        rate: Arc::new(move |x| if x.mode == 0 { rate_p.phi(x.coords[0]) } else { 0.0 }),
        cumulative_hazard: cumulative,
        jump: Arc::new(CellCycleJump),
        mesh: Mesh { grid, atlas },
        numerics: Numerics::with_step(step),
        parameters: json!({
            "description": p.describe(),
            "t_two": p.t_two,
            "x_max": p.x_max,
            "size_cells": p.size_cells,
            "phase_two_cells": p.phase_two_cells,
        }),
    })
}

/// Precomputed pieces of ω on a fixed size grid.
struct OmegaTable<'a> {
    p: &'a CellCycleParams,
    axis: Axis,
    q_edges: Vec<f64>,
}

impl<'a> OmegaTable<'a> {
    fn new(p: &'a CellCycleParams) -> Self {
        let axis = p.size_axis();
        let q_edges = axis.edges().iter().map(|&e| p.q(e)).collect();
        Self { p, axis, q_edges }
    }

    /// ∫ₐᵘ e^{Q(z)−Q(u)} dz, split so that Q varies by at most ~1 per piece.
    fn damped_length(&self, a: f64, qa: f64, u: f64, qu: f64) -> f64 {
        if u <= a {
            return 0.0;
        }
        let spread = if qa.is_finite() { qu - qa } else { 64.0 };
        let pieces = (spread.ceil() as usize).clamp(1, 64);
        gauss_legendre_composite(|z| (self.p.q(z) - qu).exp(), a, u, pieces)
    }

    /// ω and cumulative mass at all edges for cell averages `f1`.
    fn edge_values(&self, f1: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.axis.len();
        let mut omega = vec![0.0; n + 1];
        let mut cum = vec![0.0; n + 1];
        for j in 0..n {
            let (a, b) = (self.axis.edges()[j], self.axis.edges()[j + 1]);
            let decay = if omega[j] == 0.0 { 0.0 } else { (-(self.q_edges[j + 1] - self.q_edges[j])).exp() };
            omega[j + 1] = decay * omega[j] + f1[j] * self.damped_length(a, self.q_edges[j], b, self.q_edges[j + 1]);
            cum[j + 1] = cum[j] + f1[j] * (b - a);
        }
        (omega, cum)
    }

    /// (ω(u), Λ₁(u)) at an arbitrary size.
    fn at(&self, f1: &[f64], omega: &[f64], cum: &[f64], u: f64) -> (f64, f64) {
        let n = self.axis.len();
        if u <= 0.0 {
            return (0.0, 0.0);
        }
        let qu = self.p.q(u);
        if u >= self.axis.hi() {
            let w = if omega[n] == 0.0 { 0.0 } else { omega[n] * (-(qu - self.q_edges[n])).exp() };
            return (w, cum[n]);
        }
        let j = self.axis.locate(u).unwrap_or(n - 1);
        let a = self.axis.edges()[j];
        let decay = if omega[j] == 0.0 { 0.0 } else { (-(qu - self.q_edges[j])).exp() };
        let w = decay * omega[j] + f1[j] * self.damped_length(a, self.q_edges[j], u, qu);
        (w, cum[j] + f1[j] * (u - a))
    }
}

/// Size-only operator P₁ on cell averages over the size grid.
pub struct P1Operator<'a> {
    table: OmegaTable<'a>,
    /// λ at every size edge.
    newborn_edges: Vec<f64>,
}

impl<'a> P1Operator<'a> {
    pub fn new(p: &'a CellCycleParams) -> Result<Self> {
        p.validate()?;
        let table = OmegaTable::new(p);
        let newborn_edges = table.axis.edges().iter().map(|&x| p.newborn(x)).collect();
        Ok(Self { table, newborn_edges })
    }

    pub fn apply(&self, f1: &[f64]) -> Vec<f64> {
        let t = &self.table;
        let (omega, cum) = t.edge_values(f1);
        let at: Vec<(f64, f64)> = self.newborn_edges.iter().map(|&u| t.at(f1, &omega, &cum, u)).collect();
        (0..t.axis.len())
            .map(|i| {
                let mass = (at[i + 1].1 - at[i].1) - (at[i + 1].0 - at[i].0);
                mass.max(0.0) / t.axis.width(i)
            })
            .collect()
    }
}

/// One application of P₁ to cell averages `f1` on the size grid.
pub fn p1_apply(p: &CellCycleParams, f1: &[f64]) -> Result<Vec<f64>> {
    if f1.len() != p.size_cells {
        return Err(Error::InvalidParameter("f1 must have one value per size cell".into()));
    }
    Ok(P1Operator::new(p)?.apply(f1))
}

#[derive(Clone, Debug)]
pub struct P1Invariant {
    /// Cell averages of the normalized fixed point.
    pub f1: Vec<f64>,
    /// min over the grid tail of Q(λ(x)) − Q(x); uniqueness holds when it exceeds 1.
    pub uniqueness: f64,
    /// ‖P₁f₁ − f₁‖₁.
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration for the invariant density of P₁.
pub fn p1_invariant(p: &CellCycleParams, tol: f64, max_iters: usize) -> Result<P1Invariant> {
    let op = P1Operator::new(p)?;
    let axis = p.size_axis();
    let l1 = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).enumerate().map(|(i, (x, y))| (x - y).abs() * axis.width(i)).sum() };
    let mass = |a: &[f64]| -> f64 { a.iter().enumerate().map(|(i, x)| x * axis.width(i)).sum() };
    let mut f = vec![1.0 / p.x_max; p.size_cells];
    let mut change = f64::INFINITY;
    for it in 1..=max_iters {
        let next = op.apply(&f);
        let m = mass(&next);
        if !(m > 1e-300) {
            return Err(Error::NoInvariantDensity);
        }
        let next: Vec<f64> = next.iter().map(|v| v / m).collect();
        change = l1(&next, &f);
        f = next;
        if change < tol {
            let image = op.apply(&f);
            return Ok(P1Invariant { residual: l1(&image, &f), uniqueness: uniqueness_value(p), f1: f, iterations: it });
        }
    }
    Err(Error::NotConverged { iterations: max_iters, change })
}

/// min over x ∈ [x_max/2, x_max] of Q(λ(x)) − Q(x).
pub fn uniqueness_value(p: &CellCycleParams) -> f64 {
    let axis = p.size_axis();
    axis.edges()
        .iter()
        .filter(|&&x| x >= 0.5 * p.x_max)
        .map(|&x| {
            let l = p.newborn(x);
            if l <= 0.0 {
                f64::NEG_INFINITY
            } else {
                p.q(l) - p.q(x)
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// E_z(T_I) = ∫_z^∞ e^{Q(z)−Q(x)} / g(x) dx.
pub fn mean_phase_one_duration(p: &CellCycleParams, z: f64) -> f64 {
    let qz = p.q(z);
    let mut a = z;
    let mut total = 0.0;
    let mut h = (p.x_max / 64.0).max(1e-3);
    for _ in 0..10_000 {
        let b = a + h;
        let qb = p.q(b);
        let pieces = ((qb - p.q(a)).ceil() as usize).clamp(1, 64);
        total += gauss_legendre_composite(|x| (qz - p.q(x)).exp() / p.g(x), a, b, pieces);
        if qb - qz > 60.0 {
            return total;
        }
        a = b;
        if qb - qz < 1.0 {
            h *= 1.5;
        }
        if !a.is_finite() {
            break;
        }
    }
    f64::INFINITY
}

#[derive(Clone, Debug)]
pub struct CellCycleLift {
    /// Cell averages of f̄ on the model grid (unnormalized).
    pub f_bar: GridDensity,
    pub integrable: bool,
    /// E_z(T_I) at the size-cell centers.
    pub mean_phase_one: Vec<f64>,
    /// ∫ (E_z(T_I) + T_II) f₁(z) dz.
    pub predicted_mass: f64,
}

/// Lift of a P₁-invariant size density to the full state space.
pub fn cell_cycle_lift(p: &CellCycleParams, f1: &[f64]) -> Result<CellCycleLift> {
    if f1.len() != p.size_cells {
        return Err(Error::InvalidParameter("f1 must have one value per size cell".into()));
    }
    let model = build_cell_cycle(p)?;
    let table = OmegaTable::new(p);
    let (omega, cum) = table.edge_values(f1);
    let size = &table.axis;
    let nx = size.len();
    let age = &model.grid().mode(1).axes[1];
    let ny = age.len();
    let mut values = vec![0.0; model.grid().n_cells()];
    // Phase I: (1/g) ω, averaged per cell.
    for (i, v) in values.iter_mut().enumerate().take(nx) {
        let (a, b) = (size.edges()[i], size.edges()[i + 1]);
        *v = gauss_legendre(|x| table.at(f1, &omega, &cum, x).0 / p.g(x), a, b) / (b - a);
    }
    // Phase II: f_∂ transported along the size flow; cell masses from F = Λ₁ − ω.
    let big_f = |u: f64| {
        let (w, c) = table.at(f1, &omega, &cum, u);
        c - w
    };
    for i in 0..nx {
        let (a, b) = (size.edges()[i], size.edges()[i + 1]);
        for j in 0..ny {
            let (ya, yb) = (age.edges()[j], age.edges()[j + 1]);
            let mass = gauss_legendre(|y| big_f(p.size_flow(-y, b)) - big_f(p.size_flow(-y, a)), ya, yb);
            values[nx + i * ny + j] = mass.max(0.0) / ((b - a) * (yb - ya));
        }
    }
    let mean_phase_one: Vec<f64> = (0..nx).map(|i| mean_phase_one_duration(p, size.center(i))).collect();
    let contributions: Vec<f64> =
        (0..nx).map(|i| (mean_phase_one[i] + p.t_two) * f1[i] * size.width(i)).collect();
    let predicted_mass: f64 = contributions.iter().sum();
    let tail_start = nx - nx / 10;
    let tail: f64 = contributions[tail_start..].iter().sum();
    let integrable = predicted_mass.is_finite() && tail <= 1e-6 * predicted_mass.max(1e-300);
    Ok(CellCycleLift { f_bar: GridDensity::new(model.grid(), values), integrable, mean_phase_one, predicted_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Direction;

    #[test]
    fn toy_geometry() {
        let m = build_cell_cycle(&CellCycleParams::toy()).unwrap();
        let x = StatePoint::new(&[0.4, 0.0], 0);
        assert_eq!(m.advance(&x, 0.2).unwrap(), Advance::Inside(StatePoint::new(&[0.6000000000000001, 0.0], 0)));
        let y = StatePoint::new(&[1.3, 0.25], 1);
        assert_eq!(m.hitting_time(&y, Direction::Forward), 0.75);
        assert_eq!(m.hitting_time(&y, Direction::Backward), 0.25);
        assert!(m.atlas().minus().iter().all(|c| c.lifetime == 1.0));
        assert_eq!(m.classify(&StatePoint::new(&[1.0, 1.0], 1)), Location::Outgoing);
    }

    #[test]
    fn size_proportional_hazard() {
        let p = CellCycleParams { entry: EntryRate::Linear(1.0), ..CellCycleParams::toy() };
        let m = build_cell_cycle(&p).unwrap();
        let h = m.hazard_integral(&StatePoint::new(&[0.4, 0.0], 0), 0.5).unwrap();
        assert!((h - 0.325).abs() < 1e-14);
    }

    #[test]
    fn toy_p1_closed_form() {
        // P₁f₁(x) = 2e^{1−2x} ∫₀^{2x−1} e^z f₁(z) dz for x > 1/2.
        let p = CellCycleParams::toy();
        let axis = p.size_axis();
        let f1: Vec<f64> = (0..p.size_cells).map(|i| if axis.center(i) < 2.0 { 0.5 } else { 0.0 }).collect();
        let out = p1_apply(&p, &f1).unwrap();
        let exact = |x: f64| {
            if x <= 0.5 {
                0.0
            } else {
                let u = (2.0 * x - 1.0).min(2.0);
                2.0 * (1.0 - 2.0 * x).exp() * 0.5 * (u.exp() - 1.0)
            }
        };
        for (i, o) in out.iter().enumerate().take(p.size_cells) {
            let avg = gauss_legendre(exact, axis.edges()[i], axis.edges()[i + 1]) / axis.width(i);
            assert!((o - avg).abs() < 1e-10, "cell {i}: {o} vs {avg}");
        }
    }

    #[test]
    fn p1_preserves_mass() {
        let p = CellCycleParams::toy();
        let axis = p.size_axis();
        let f1: Vec<f64> = (0..p.size_cells).map(|i| (-(axis.center(i) - 2.0).powi(2)).exp() * (axis.center(i) < 6.0) as u8 as f64).collect();
        let out = p1_apply(&p, &f1).unwrap();
        let m = |a: &[f64]| a.iter().map(|v| v * axis.width(0)).sum::<f64>();
        assert!((m(&out) - m(&f1)).abs() < 1e-12);
    }

    #[test]
    fn toy_mean_phase_one_is_one() {
        let p = CellCycleParams::toy();
        for z in [0.1, 1.0, 7.5] {
            assert!((mean_phase_one_duration(&p, z) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn uniqueness_value_is_x_minus_one_for_toy() {
        let p = CellCycleParams::toy();
        assert!((uniqueness_value(&p) - (0.5 * p.x_max - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn division_is_mass_preserving() {
        let m = build_cell_cycle(&CellCycleParams::toy()).unwrap();
        let b: Vec<f64> = (0..m.atlas().plus().len()).map(|j| ((j % 7) as f64) * 0.3).collect();
        let out = m.jump().p0_apply(m.mesh(), &vec![0.0; m.grid().n_cells()], &b);
        let bmass: f64 = b.iter().zip(m.atlas().plus()).map(|(v, c)| v * c.weight).sum();
        assert!((m.grid().mass(&out) - bmass).abs() < 1e-12);
    }
}
