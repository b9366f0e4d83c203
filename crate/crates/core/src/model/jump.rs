use super::state::StatePoint;
use super::Mesh;
use rand::RngCore;

/// Jump law 𝒫 split into its interior part P₀ and boundary part P_∂.
///
/// Density inputs are `rate_part` (ϑf per interior cell, density per m) and
/// `outflux` (f₊ per Γ⁺ cell, density per m⁺). Both operators are linear and
/// positivity preserving; their combined output mass never exceeds the input
/// mass.
pub trait JumpLaw: Send + Sync {
    /// Post-jump state from a pre-jump state in E ∪ Γ⁺. Must land in E.
    fn sample(&self, from: &StatePoint, rng: &mut dyn RngCore) -> StatePoint;
    /// Interior part: density per m on the interior grid.
    fn p0_apply(&self, mesh: &Mesh, rate_part: &[f64], outflux: &[f64]) -> Vec<f64>;
    /// Boundary part: density per m⁻ on the Γ⁻ cells.
    fn p_partial_apply(&self, mesh: &Mesh, rate_part: &[f64], outflux: &[f64]) -> Vec<f64>;
}
