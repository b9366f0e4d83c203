use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// Continuous coordinates of a state.
pub type Coords = SmallVec<[f64; 3]>;

/// A point of the hybrid state space: coordinates plus a mode index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatePoint {
    pub coords: Coords,
    pub mode: usize,
}

impl StatePoint {
    pub fn new(coords: &[f64], mode: usize) -> Self {
        Self { coords: SmallVec::from_slice(coords), mode }
    }

    /// One-dimensional state in mode 0.
    pub fn scalar(x: f64) -> Self {
        Self::new(&[x], 0)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A declared mode: name and coordinate dimension.
#[derive(Clone, Debug)]
pub struct ModeSpec {
    pub name: String,
    pub dim: usize,
}

/// Classification of a point relative to the state space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    /// In the open interior E⁰.
    Interior,
    /// On the incoming boundary Γ⁻ (and not on Γ⁺).
    Incoming,
    /// On the active boundary Γ⁺.
    Outgoing,
    /// Outside the closure of the state space.
    Outside,
}
