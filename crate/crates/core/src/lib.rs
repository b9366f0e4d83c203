//! Simulation and density evolution for piecewise deterministic Markov
//! processes (PDMPs) with active and incoming boundaries.
//!
//! A [`model::PdmpModel`] bundles the characteristics of a process (flow,
//! cocycle, hitting times, jump rate, jump law) together with the grids used
//! to discretize densities. On top of it the crate offers
//!
//! * exact event-driven path simulation and ensemble density estimation
//!   ([`simulator`]),
//! * density evolution for the induced semigroup and its resolvent
//!   ([`semigroup`]),
//! * the embedded jump chain, its invariant densities and the lift to
//!   continuous-time invariant densities ([`embedded_chain`]),
//! * built-in models ([`models`]) and cross-validating oracles
//!   ([`verification`]),
//! * a JSON-configured batch front end ([`cli`]).


// Negated comparisons on floats reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod cli;
pub mod embedded_chain;
pub mod error;
pub mod model;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod semigroup;
pub mod simulator;
pub mod verification;

pub use error::{Error, Result};
pub use model::{
    BoundaryAtlas, BoundaryDensity, DensityPair, FlowMap, GridDensity, InteriorGrid, JumpLaw,
    Location, PdmpModel, StatePoint,
};
