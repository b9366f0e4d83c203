use thiserror::Error;

/// Errors reported by the kit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time must be finite, got {0}")]
    NonFiniteTime(f64),
    #[error("mode {mode} is not declared (model has {modes} modes)")]
    UnknownMode { mode: usize, modes: usize },
    #[error("state has {got} coordinates but mode {mode} declares {expected}")]
    DimensionMismatch { mode: usize, expected: usize, got: usize },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("{count} grid cells have divergent backward integrals (first cell {first})")]
    DivergentCells { count: usize, first: usize },
    #[error("mass decayed to zero: the operator has no invariant density")]
    NoInvariantDensity,
    #[error("iteration did not converge after {iterations} sweeps (last change {change:e})")]
    NotConverged { iterations: usize, change: f64 },
    #[error("zero mass: {0}")]
    ZeroMass(&'static str),
    #[error("lifted density is not integrable")]
    NonIntegrable,
    #[error("jump law sent {from:?} to {to:?}, which is not in the state space")]
    JumpOutsideDomain { from: crate::StatePoint, to: crate::StatePoint },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
