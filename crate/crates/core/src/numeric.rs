//! Scalar root finding, bracketed maximization and normal quantiles.

use statrs::distribution::{ContinuousCDF, Normal};

/// 1 / golden ratio.
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Result of a bracketed scalar maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
///
/// Terminates once the bracket is narrower than `tol`. The endpoints are
/// compared against the interior optimum so boundary maxima are returned
/// exactly rather than `tol / 2` inside the interval.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Maximum
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(lo <= hi, "empty bracket [{lo}, {hi}]");
    let (mut a, mut b) = (lo, hi);
    if b - a <= tol {
        let x = 0.5 * (a + b);
        return Maximum { x, value: f(x) };
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        // `>=` keeps the left part on plateaus (e.g. both probes at -inf
        // beyond a feasibility cutoff).
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let mut best = Maximum { x, value: f(x) };
    for edge in [lo, hi] {
        let v = f(edge);
        if v > best.value {
            best = Maximum { x: edge, value: v };
        }
    }
    best
}

/// Bisection for the boundary of a monotone predicate on `[lo, hi]`.
///
/// `pred(lo)` must be false and `pred(hi)` true. Returns the smallest point
/// found (within `tol`) for which the predicate holds, so the result is
/// always on the satisfying side.
pub fn bisect_threshold<P>(mut pred: P, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    P: FnMut(f64) -> bool,
{
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

/// Quantile of `N(mean, std)` at probability `p`, `0 < p < 1`.
///
/// Backed by statrs' inverse error function (double precision).
pub fn normal_quantile(p: f64, mean: f64, std: f64) -> f64 {
    mean + std * standard_normal_quantile(p)
}

pub fn standard_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    Normal::standard().inverse_cdf(p)
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn golden_finds_interior_max() {
        let m = golden_section_max(|x| -(x - 1.3).powi(2), 0.0, 10.0, 1e-10);
        assert_abs_diff_eq!(m.x, 1.3, epsilon = 1e-8);
    }

    #[test]
    fn golden_returns_exact_boundary() {
        let m = golden_section_max(|x| -x, 0.0, 3.0, 1e-8);
        assert_eq!(m.x, 0.0);
        let m = golden_section_max(|x| x, 0.0, 3.0, 1e-8);
        assert_eq!(m.x, 3.0);
    }

    #[test]
    fn golden_degenerate_bracket() {
        let m = golden_section_max(|x| x * x, 2.0, 2.0, 1e-8);
        assert_eq!(m.x, 2.0);
    }

    #[test]
    fn golden_stops_at_feasibility_cutoff() {
        let f = |x: f64| if x <= 0.7 { x } else { f64::NEG_INFINITY };
        let m = golden_section_max(f, 0.0, 1.0, 1e-10);
        assert_abs_diff_eq!(m.x, 0.7, epsilon = 1e-9);
    }

    #[test]
    fn bisect_lands_on_true_side() {
        let x = bisect_threshold(|x| x * x >= 2.0, 0.0, 2.0, 1e-12);
        assert!(x * x >= 2.0);
        assert_abs_diff_eq!(x, std::f64::consts::SQRT_2, epsilon = 1e-11);
    }

    // Reference values from standard normal tables.
    #[test]
    fn quantile_matches_tables() {
        assert_abs_diff_eq!(standard_normal_quantile(0.75), 0.67449, epsilon = 1e-5);
        assert_abs_diff_eq!(standard_normal_quantile(0.995), 2.5758, epsilon = 1e-4);
        assert_abs_diff_eq!(standard_normal_quantile(0.975), 1.959964, epsilon = 1e-6);
        assert_abs_diff_eq!(standard_normal_quantile(0.5), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-6] {
            let z = standard_normal_quantile(p);
            assert_abs_diff_eq!(standard_normal_cdf(z), p, epsilon = 1e-9);
        }
    }
}
