//! Small numerical helpers shared by the analytic modules.

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// `ln C(n, k)`, or `-∞` when `k > n`.
///
/// Small `k` (after symmetry) is summed term by term; the log-gamma
/// difference loses about `ln n` ulps of relative accuracy.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k <= 64 {
        (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
    } else {
        ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
    }
}

/// `C(a, i) / C(b, j)`, zero when the numerator vanishes.
pub fn choose_ratio(a: u64, i: u64, b: u64, j: u64) -> f64 {
    if i > a {
        return 0.0;
    }
    debug_assert!(j <= b, "denominator C({b}, {j}) vanishes");
    (ln_choose(a, i) - ln_choose(b, j)).exp()
}

/// Bisection for the boundary between `lo`, where `above(lo)` is false, and
/// `hi`, where it is true. Stops once the bracket is narrower than `tol` or
/// cannot shrink any further in floating point; returns the final bracket.
pub fn bisect<F>(mut lo: f64, mut hi: f64, tol: f64, above: F) -> (f64, f64)
where
    F: Fn(f64) -> bool,
{
    debug_assert!(lo <= hi);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Midpoint of the bracket returned by [`bisect`].
pub fn bisect_point<F>(lo: f64, hi: f64, tol: f64, above: F) -> f64
where
    F: Fn(f64) -> bool,
{
    let (lo, hi) = bisect(lo, hi, tol, above);
    0.5 * (lo + hi)
}
