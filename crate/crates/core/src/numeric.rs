//! Small numerical helpers shared across modules.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Solves `f(x) = target` for nondecreasing `f` on `[lo, hi]`, using Newton
/// steps where they stay inside the bracket and bisection otherwise.
pub fn solve_increasing(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let fx = f(x) - target;
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= tol {
            break;
        }
        let d = df(x);
        let newton = if d.is_finite() && d > 0.0 { x - fx / d } else { f64::NAN };
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        // Newton may creep towards one bracket end; force a bisection when
        // its step is already below tolerance.
        if (x - lo).abs() < 0.25 * tol || (hi - x).abs() < 0.25 * tol {
            x = 0.5 * (lo + hi);
        }
    }
    0.5 * (lo + hi)
}

/// Bisection for the root of a nonincreasing function on `[lo, hi]` with
/// `f(lo) > 0 > f(hi)`.
pub fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `ceil(x)` that treats values within 1e-9 above an integer as that integer,
/// so `0.7 * 10` counts as 7 rather than 8.
pub fn tolerant_ceil(x: f64) -> f64 {
    (x - 1e-9).ceil().max(0.0)
}

/// `floor(x)` that treats values within 1e-9 below an integer as that integer.
pub fn tolerant_floor(x: f64) -> f64 {
    (x + 1e-9).floor().max(0.0)
}

/// Evenly spaced grid of `points` values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (points - 1) as f64;
            (0..points)
                .map(|i| if i + 1 == points { stop } else { start + step * i as f64 })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        let d = normal_cdf(1.959963984540054) - 0.975;
        assert!(d.abs() < 1e-11, "{d}");
    }

    #[test]
    fn solver_inverts_cubic() {
        let x = solve_increasing(|x| x * x * x, |x| 3.0 * x * x, 0.125, 0.0, 1.0, 1e-14);
        assert!((x - 0.5).abs() < 1e-13);
    }

    #[test]
    fn tolerant_rounding() {
        assert_eq!(tolerant_ceil(0.7 * 10.0), 7.0);
        assert_eq!(tolerant_ceil(2.5), 3.0);
        assert_eq!(tolerant_floor(0.29 * 100.0), 29.0);
        assert_eq!(tolerant_floor(2.5), 2.0);
    }

    #[test]
    fn linspace_hits_endpoints() {
        let g = linspace(0.0, 1.0, 2001);
        assert_eq!(g.len(), 2001);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2000], 1.0);
        assert!((g[1000] - 0.5).abs() < 1e-15);
    }
}
