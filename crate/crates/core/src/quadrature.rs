//! One-dimensional quadrature and root finding.

use crate::error::{Error, Result};

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Eight-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        sum += w * (f(mid - half * x) + f(mid + half * x));
    }
    sum * half
}

/// Nodes and weights of the eight-point rule mapped to `[a, b]`.
pub fn gauss_legendre_nodes(a: f64, b: f64) -> [(f64, f64); 8] {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 8];
    for k in 0..4 {
        out[2 * k] = (mid - half * GL8_NODES[k], half * GL8_WEIGHTS[k]);
        out[2 * k + 1] = (mid + half * GL8_NODES[k], half * GL8_WEIGHTS[k]);
    }
    out
}

/// Composite Gauss–Legendre rule with `pieces` equal subintervals.
pub fn gauss_legendre_composite<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, pieces: usize) -> f64 {
    let n = pieces.max(1);
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == n { b } else { lo + h };
            gauss_legendre(&mut f, lo, hi)
        })
        .sum()
}

/// Adaptive Simpson quadrature with relative tolerance `rtol`.
///
/// Fails when the recursion depth is exhausted before the local error
/// estimates meet the tolerance.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rtol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Coarse magnitude estimate sets the absolute floor.
    let scale = gauss_legendre(&mut f, a, b).abs().max(whole.abs());
    let atol = (rtol * scale).max(1e-300);
    let out = simpson_rec(&mut f, a, b, fa, fm, fb, whole, atol, 50)?;
    if !out.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    atol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * atol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || !delta.is_finite() {
        return Err(Error::Quadrature(format!(
            "adaptive Simpson failed on [{a}, {b}]; supply a closed-form cumulative hazard"
        )));
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * atol, depth - 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * atol, depth - 1)?)
}

/// Weights `(w0, w1)` of the rule `∫₀ʰ e^{-Λ(s)} p(s) ds ≈ e^{-Λ₀}(w0·p₀ + w1·p₁)·h`
/// for `p` linear and `Λ` linear with increment `delta`.
pub fn exp_trapezoid_weights(delta: f64) -> (f64, f64) {
    if delta < 0.05 {
        // Power series of E1 = (1-e^{-d})/d and M = (1-(1+d)e^{-d})/d².
        let (mut e1, mut m) = (0.0, 0.0);
        let mut term = 1.0; // (-d)^k / k!
        for k in 0..12 {
            let kf = k as f64;
            e1 += term / (kf + 1.0);
            m += term * (kf + 1.0) / ((kf + 1.0) * (kf + 2.0));
            term *= -delta / (kf + 1.0);
        }
        (e1 - m, m)
    } else {
        let e = (-delta).exp();
        let e1 = (1.0 - e) / delta;
        let m = (1.0 - (1.0 + delta) * e) / (delta * delta);
        (e1 - m, m)
    }
}

/// Smallest `t` in `[lo, hi]` at which the monotone predicate turns true,
/// to within `tol`. Assumes `pred(lo)` is false and `pred(hi)` is true.
pub fn bisect<P: FnMut(f64) -> bool>(mut pred: P, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Root of a nondecreasing function `g` in `[lo, hi]` with `g(lo) ≤ 0 ≤ g(hi)`,
/// by safeguarded secant (Illinois) steps, to time tolerance `tol`.
pub fn monotone_root<G: FnMut(f64) -> f64>(mut g: G, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut glo = g(lo);
    let mut ghi = g(hi);
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mut t = if ghi > glo { lo - glo * (hi - lo) / (ghi - glo) } else { 0.5 * (lo + hi) };
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let gt = g(t);
        if gt >= 0.0 {
            hi = t;
            ghi = gt;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        } else {
            lo = t;
            glo = gt;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        }
        // Guard against stalling on one side.
        if hi - lo > tol && (hi - lo) < 4.0 * tol {
            let mid = 0.5 * (lo + hi);
            if g(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_for_degree_15() {
        let v = gauss_legendre(|x| x.powi(15) + x.powi(4), 0.0, 2.0);
        assert_relative_eq!(v, 2f64.powi(16) / 16.0 + 32.0 / 5.0, max_relative = 1e-13);
    }

    #[test]
    fn simpson_integrates_exponential() {
        let v = adaptive_simpson(|x| x.exp(), 0.0, 3.0, 1e-10).unwrap();
        assert_relative_eq!(v, 3f64.exp() - 1.0, max_relative = 1e-9);
    }

    #[test]
    fn simpson_reports_singularity() {
        assert!(adaptive_simpson(|x| 1.0 / x, 0.0, 1.0, 1e-8).is_err());
    }

    #[test]
    fn exp_weights_integrate_linear_times_exponential() {
        // ∫₀ʰ e^{-cs}(p0 + (p1-p0)s/h) ds for c h = delta.
        for &delta in &[1e-6, 1e-4, 2e-3, 0.1, 1.0, 5.0] {
            let h = 0.7;
            let c = delta / h;
            let (p0, p1) = (1.3, -0.4);
            let exact = adaptive_simpson(|s| (-c * s).exp() * (p0 + (p1 - p0) * s / h), 0.0, h, 1e-13).unwrap();
            let (w0, w1) = exp_trapezoid_weights(delta);
            assert_relative_eq!(h * (w0 * p0 + w1 * p1), exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn monotone_root_finds_crossing() {
        let r = monotone_root(|t| t.powi(3) + t - 1.0, 0.0, 1.0, 1e-12);
        assert!((r.powi(3) + r - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bisect_finds_threshold() {
        let t = bisect(|t| t >= 0.3, 0.0, 1.0, 1e-12);
        assert!((t - 0.3).abs() < 1e-11);
    }
}
