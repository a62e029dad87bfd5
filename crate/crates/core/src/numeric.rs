//! One-dimensional search helpers shared by the loss calculus, the optimizers
//! and the brute-force reference computations.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
///
/// Returns `(argmin, min)`. Stops once the bracket is narrower than `width`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    width: f64,
) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // 200 iterations shrink any finite bracket below f64 resolution.
    for _ in 0..200 {
        if hi - lo <= width {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    // The endpoints themselves are candidates: for monotone objectives the
    // infimum sits on the boundary of the search interval.
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Golden-section maximization; see [`golden_section_min`].
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, width: f64) -> (f64, f64) {
    let (x, v) = golden_section_min(|x| -f(x), lo, hi, width);
    (x, -v)
}

/// Bisection for the root of a nondecreasing function with `f(lo) < 0 <= f(hi)`.
pub fn bisect_increasing<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * (1.0 + mid.abs()) || mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_quadratic_minimum() {
        let (x, v) = golden_section_min(|x| (x - 1.25) * (x - 1.25), -10.0, 10.0, 1e-10);
        assert!((x - 1.25).abs() < 1e-9);
        assert!(v < 1e-18);
    }

    #[test]
    fn golden_respects_boundary_minimum() {
        let (x, v) = golden_section_min(|x| x.exp(), -5.0, 5.0, 1e-9);
        assert_eq!(x, -5.0);
        assert_eq!(v, (-5.0f64).exp());
    }

    #[test]
    fn bisection_finds_root() {
        let r = bisect_increasing(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
    }
}
