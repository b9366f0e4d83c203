use super::state::StatePoint;
use crate::quadrature::bisect;
use std::sync::Arc;

/// Deterministic motion between jumps.
///
/// Implementations must satisfy the group law `phi(s, phi(t, x)) = phi(s + t, x)`
/// and the cocycle law `jac(t + s, x) = jac(t, phi(s, x)) · jac(s, x)` wherever
/// the segments are defined. Hitting times are `f64::INFINITY` when the
/// boundary is never reached and zero on the respective boundary.
pub trait FlowMap: Send + Sync {
    fn phi(&self, t: f64, x: &StatePoint) -> StatePoint;
    /// Cocycle J_t(x) of the reference measure.
    fn jac(&self, t: f64, x: &StatePoint) -> f64;
    /// Forward time to Γ⁺.
    fn hit_plus(&self, x: &StatePoint) -> f64;
    /// Backward time to Γ⁻.
    fn hit_minus(&self, x: &StatePoint) -> f64;
    /// Divergence a(x) when the cocycle is of Liouville type.
    fn divergence(&self, _x: &StatePoint) -> Option<f64> {
        None
    }
    /// Whether `x` lies in the closure of the state space.
    fn contains(&self, x: &StatePoint) -> bool;
}

pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Single-mode flow of an ODE `ẋ = b(x)` on an open box (or all of ℝᵈ),
/// integrated with fixed-step RK4. The cocycle is the Liouville factor
/// `exp ∫ div b`, integrated alongside the state.
///
/// Γ⁺ is the part of the box boundary where the flow exits and Γ⁻ where it
/// enters; hitting times come from stepping plus bisection.
#[derive(Clone)]
pub struct OdeFlow {
    dim: usize,
    field: VectorField,
    divergence: ScalarField,
    step: f64,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
    max_time: f64,
    hit_tol: f64,
}

impl OdeFlow {
    pub fn new(dim: usize, field: VectorField, divergence: ScalarField, step: f64) -> Self {
        assert!(step > 0.0, "step must be positive");
        Self { dim, field, divergence, step, bounds: None, max_time: 1e3, hit_tol: 1e-10 }
    }

    /// Restricts the state space to the closed box `[lo, hi]`.
    pub fn with_box(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert!(lo.len() == self.dim && hi.len() == self.dim);
        self.bounds = Some((lo, hi));
        self
    }

    /// Hitting times beyond `max_time` count as never.
    pub fn with_max_time(mut self, max_time: f64) -> Self {
        self.max_time = max_time;
        self
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        // y = (x, log J)
        (self.field)(&y[..self.dim], &mut out[..self.dim]);
        out[self.dim] = (self.divergence)(&y[..self.dim]);
    }

    /// Integrates state and log-cocycle over signed time `t`.
    fn integrate(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let n = self.dim + 1;
        let mut y = x.to_vec();
        y.push(0.0);
        if t == 0.0 {
            return y;
        }
        let steps = (t.abs() / self.step).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for _ in 0..steps {
            self.rhs(&y, &mut k1);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            self.rhs(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            self.rhs(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + h * k3[i];
            }
            self.rhs(&tmp, &mut k4);
            for i in 0..n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y
    }

    fn in_box(&self, x: &[f64]) -> bool {
        match &self.bounds {
            None => true,
            Some((lo, hi)) => x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &h))| v >= l && v <= h),
        }
    }

    fn strictly_inside(&self, x: &[f64]) -> bool {
        match &self.bounds {
            None => true,
            Some((lo, hi)) => x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &h))| v > l && v < h),
        }
    }

    fn exit_time(&self, x: &[f64], sign: f64) -> f64 {
        if self.bounds.is_none() {
            return f64::INFINITY;
        }
        let mut t = 0.0;
        let mut cur = x.to_vec();
        let mut first = true;
        while t < self.max_time {
            let next = self.integrate(sign * self.step, &cur);
            let next_x = &next[..self.dim];
            // Boundary points that flow straight out have zero exit time.
            let left = if first { !self.strictly_inside(next_x) } else { !self.in_box(next_x) };
            if left {
                let base = cur.clone();
                let s = bisect(|s| !self.strictly_inside(&self.integrate(sign * s, &base)[..self.dim]), 0.0, self.step, self.hit_tol);
                let total = t + s;
                return if total <= self.hit_tol { 0.0 } else { total };
            }
            first = false;
            cur = next_x.to_vec();
            t += self.step;
        }
        f64::INFINITY
    }
}

impl FlowMap for OdeFlow {
    fn phi(&self, t: f64, x: &StatePoint) -> StatePoint {
        let y = self.integrate(t, &x.coords);
        StatePoint::new(&y[..self.dim], x.mode)
    }

    fn jac(&self, t: f64, x: &StatePoint) -> f64 {
        self.integrate(t, &x.coords)[self.dim].exp()
    }

    fn hit_plus(&self, x: &StatePoint) -> f64 {
        self.exit_time(&x.coords, 1.0)
    }

    fn hit_minus(&self, x: &StatePoint) -> f64 {
        self.exit_time(&x.coords, -1.0)
    }

    fn divergence(&self, x: &StatePoint) -> Option<f64> {
        Some((self.divergence)(&x.coords))
    }

    fn contains(&self, x: &StatePoint) -> bool {
        x.coords.len() == self.dim && self.in_box(&x.coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exponential_growth() -> OdeFlow {
        OdeFlow::new(1, Arc::new(|x: &[f64], out: &mut [f64]| out[0] = x[0]), Arc::new(|_: &[f64]| 1.0), 1e-3)
    }

    #[test]
    fn liouville_cocycle_matches_finite_difference() {
        let f = exponential_growth();
        let x = StatePoint::scalar(1.0);
        let j = f.jac(0.5, &x);
        let h = 1e-5;
        let fd = (f.phi(0.5, &StatePoint::scalar(1.0 + h)).coords[0] - f.phi(0.5, &StatePoint::scalar(1.0 - h)).coords[0])
            / (2.0 * h);
        assert_relative_eq!(j, fd, max_relative = 1e-8);
        assert_relative_eq!(j, 0.5f64.exp(), max_relative = 1e-10);
    }

    #[test]
    fn group_law_holds() {
        let f = exponential_growth();
        let x = StatePoint::scalar(0.7);
        let a = f.phi(0.3, &f.phi(0.4, &x));
        let b = f.phi(0.7, &x);
        assert_relative_eq!(a.coords[0], b.coords[0], max_relative = 1e-10);
    }

    #[test]
    fn box_hitting_times_by_bisection() {
        let f = exponential_growth().with_box(vec![0.5], vec![2.0]);
        let x = StatePoint::scalar(1.0);
        assert_relative_eq!(f.hit_plus(&x), 2f64.ln(), max_relative = 1e-9);
        assert_relative_eq!(f.hit_minus(&x), 2f64.ln(), max_relative = 1e-9);
        assert_eq!(f.hit_plus(&StatePoint::scalar(2.0)), 0.0);
        assert_eq!(f.hit_minus(&StatePoint::scalar(0.5)), 0.0);
    }
}
