//! Per-state waterfilling for a common multicast codeword.
//!
//! Serving the set `G` with instantaneous power `x` yields
//! `Σ_{k∈G} log(1 + g_k·x)`; its derivative in `x` is
//! `Σ_{k∈G} 1/(x + 1/g_k)`. At the optimum this equals the water level
//! `λ` whenever the power is positive, and the power is `[x]⁺`.

use crate::error::{Error, Result};

/// Residual target of the inner root solve.
pub const ROOT_TOL: f64 = 1e-12;

fn marginal(inv_gains: &[f64], x: f64) -> (f64, f64) {
    let mut f = 0.0;
    let mut df = 0.0;
    for &ig in inv_gains {
        let r = 1.0 / (x + ig);
        f += r;
        df -= r * r;
    }
    (f, df)
}

/// Root of `Σ_{k} 1/(x + 1/g_k) = λ` on `(-1/max g, ∞)`.
///
/// The map is strictly decreasing and convex there, so Newton started left
/// of the root climbs monotonically onto it. Users with zero gain carry no
/// marginal and are skipped. The root can be negative; callers clamp.
pub fn solve_waterfilling(gains: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("water level {lambda} must be positive")));
    }
    let inv: Vec<f64> = gains.iter().filter(|&&g| g > 0.0).map(|&g| 1.0 / g).collect();
    if inv.is_empty() {
        return Err(Error::invalid("waterfilling needs at least one positive gain"));
    }
    Ok(root_from_inverse(&inv, lambda))
}

/// Same as [`solve_waterfilling`] with precomputed `1/g_k`, all finite.
pub(crate) fn root_from_inverse(inv: &[f64], lambda: f64) -> f64 {
    let m = inv.len() as f64;
    let (mut inv_min, mut inv_max) = (f64::INFINITY, 0.0f64);
    for &v in inv {
        inv_min = inv_min.min(v);
        inv_max = inv_max.max(v);
    }
    if inv.len() == 1 {
        return 1.0 / lambda - inv[0];
    }
    // Lower bounds: the strongest term alone, and m copies of the weakest.
    let mut x = (1.0 / lambda - inv_min).max(m / lambda - inv_max);
    let scale = lambda.max(1.0);
    for _ in 0..100 {
        let (f, df) = marginal(inv, x);
        let resid = f - lambda;
        if resid.abs() <= ROOT_TOL * scale {
            return x;
        }
        let next = x - resid / df;
        if !(next > x) {
            // Converged to rounding; Newton from the left only moves right.
            return x;
        }
        x = next;
    }
    bisect(inv, lambda, x, m / lambda - inv_min)
}

fn bisect(inv: &[f64], lambda: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if marginal(inv, mid).0 > lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Instantaneous power `[x]⁺` for the scheduled gains at water level `λ`.
/// Skips the root solve when the power is certainly zero.
pub(crate) fn power_from_inverse(inv: &[f64], lambda: f64) -> f64 {
    let m = inv.len() as f64;
    let inv_min = inv.iter().copied().fold(f64::INFINITY, f64::min);
    // Upper bound on the root: m/λ - 1/g_max.
    if m / lambda - inv_min <= 0.0 {
        return 0.0;
    }
    root_from_inverse(inv, lambda).max(0.0)
}

/// `|λ − Σ 1/(x + 1/g_k)|`, the stationarity residual of an allocation.
pub fn kkt_residual(gains: &[f64], lambda: f64, x: f64) -> f64 {
    let inv: Vec<f64> = gains.iter().filter(|&&g| g > 0.0).map(|&g| 1.0 / g).collect();
    (marginal(&inv, x).0 - lambda).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force scan: the last grid point where the marginal still
    /// exceeds λ.
    fn grid_root(gains: &[f64], lambda: f64, lo: f64, hi: f64, step: f64) -> f64 {
        let mut x = lo;
        let mut best = lo;
        while x <= hi {
            let s: f64 = gains.iter().map(|g| 1.0 / (x + 1.0 / g)).sum();
            if s >= lambda {
                best = x;
            }
            x += step;
        }
        best
    }

    #[test]
    fn closed_forms() {
        assert!((solve_waterfilling(&[1.0], 0.2).unwrap() - 4.0).abs() < 1e-12);
        assert!((solve_waterfilling(&[1.0, 1.0], 0.4).unwrap() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn matches_grid_scan() {
        // 1/(x+1/4) + 1/(x+1) = 1; the grid oracle brackets the root to 1e-6.
        let oracle = grid_root(&[4.0, 1.0], 1.0, 0.0, 2.0, 1e-6);
        let x = solve_waterfilling(&[4.0, 1.0], 1.0).unwrap();
        assert!((x - oracle).abs() <= 2e-6, "{x} vs {oracle}");
        assert!(kkt_residual(&[4.0, 1.0], 1.0, x) <= 1e-10);
        // Clearing denominators gives x² − 0.75x − 1 = 0.
        assert!((x - 1.443_000_468_164_691_3).abs() < 1e-10);
    }

    #[test]
    fn negative_roots_are_returned() {
        // λ above Σ g: no positive power possible.
        let x = solve_waterfilling(&[1.0, 2.0], 10.0).unwrap();
        assert!(x < 0.0);
        assert!(kkt_residual(&[1.0, 2.0], 10.0, x) <= 1e-9);
        assert_eq!(power_from_inverse(&[1.0, 0.5], 10.0), 0.0);
    }

    #[test]
    fn residual_is_tight_over_a_sweep() {
        let mut worst: f64 = 0.0;
        for i in 1..60 {
            let lambda = 0.01 * 1.2f64.powi(i);
            for gains in [&[0.03, 2.0, 7.5][..], &[0.5, 0.5], &[1e-3, 1e3], &[3.0, 1.0, 0.1, 0.2]] {
                let x = solve_waterfilling(gains, lambda).unwrap();
                worst = worst.max(kkt_residual(gains, lambda, x) / lambda.max(1.0));
            }
        }
        assert!(worst <= 1e-10, "worst residual {worst}");
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(solve_waterfilling(&[1.0], 0.0).is_err());
        assert!(solve_waterfilling(&[0.0], 1.0).is_err());
    }
}
