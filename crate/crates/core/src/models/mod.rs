//! Built-in models.
//!
//! * [`line`]: drift–redistribute on (0,1), free flow on ℝ, and a static
//!   constant-rate jumper.
//! * [`cell_cycle`]: two-phase cell cycle with size growth and division.
//! * [`kinetic`]: one-dimensional kinetic slab with collisions and wall
//!   reflection.

pub mod cell_cycle;
pub mod kinetic;
pub mod line;

pub use cell_cycle::{
    build_cell_cycle, cell_cycle_lift, mean_phase_one_duration, p1_apply, p1_invariant, CellCycleLift,
    CellCycleParams, EntryRate, GrowthLaw, P1Invariant,
};
pub use kinetic::{build_kinetic_slab, Collision, KineticSlabParams, WallOperator};
pub use line::{build_drift_redistribute, constant_rate_jumper, drift_redistribute, free_flow, LineDomain, LineParams};

use crate::error::{Error, Result};
use crate::model::PdmpModel;

/// Builds a built-in model from its name and JSON parameters.
///
/// Names: `drift_redistribute`, `free_flow`, `constant_rate`, `cell_cycle`,
/// `kinetic_slab` (aliases `m1`..`m5`).
pub fn build_by_name(name: &str, params: &serde_json::Value) -> Result<PdmpModel> {
    let get = |key: &str| params.get(key).and_then(serde_json::Value::as_f64);
    let cells = params.get("cells").and_then(serde_json::Value::as_u64).map(|c| c as usize);
    match name {
        "drift_redistribute" | "m1" => {
            let mut p = LineParams::drift_redistribute(cells.unwrap_or(200));
            if let Some(v) = get("rate") {
                p.rate = v;
            }
            build_drift_redistribute(&p)
        }
        "free_flow" | "m2" => {
            let mut p = LineParams::free_flow(cells.unwrap_or(200));
            if let (Some(lo), Some(hi)) = (get("window_lo"), get("window_hi")) {
                p.domain = LineDomain::Line { window_lo: lo, window_hi: hi };
            }
            if let Some(v) = get("velocity") {
                p.velocity = v;
            }
            build_drift_redistribute(&p)
        }
        "constant_rate" | "m3" => build_drift_redistribute(&LineParams::constant_rate(get("rate").unwrap_or(1.0), cells.unwrap_or(200))),
        "cell_cycle" | "m4" => build_cell_cycle(&CellCycleParams::from_json(params)?),
        "kinetic_slab" | "m5" => build_kinetic_slab(&KineticSlabParams::from_json(params)?),
        other => Err(Error::Config(format!("unknown model `{other}`"))),
    }
}
