//! Small root-finding and maximization kernels used by the solvers.
//!
//! All functions here assume well-behaved inputs (continuous f, finite
//! endpoints); the callers own the mathematical preconditions and surface
//! `Error::Solver` when a bracket cannot be established.

use crate::error::{Error, Result};

/// Bisect a root of `f` on `[lo, hi]`, where `f(lo)` and `f(hi)` have
/// opposite signs (either may be zero). Stops when `|f(mid)| <= f_tol` or
/// the bracket shrinks below machine resolution, whichever comes first,
/// and returns the midpoint.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, f_tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::solver(format!(
            "no sign change on [{lo}, {hi}]: f(lo) = {flo:e}, f(hi) = {fhi:e}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid); // bracket exhausted at machine precision
        }
        let fmid = f(mid);
        if fmid.abs() <= f_tol {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expand a bracket for a decreasing function `f` by doubling outward from
/// `start` until `f` changes sign, then bisect. `f` must be (weakly)
/// decreasing; the root can sit anywhere within `limit` of the start.
pub(crate) fn bisect_decreasing<F: Fn(f64) -> f64>(
    f: F,
    start: f64,
    limit: f64,
    f_tol: f64,
) -> Result<f64> {
    let f0 = f(start);
    if f0.abs() <= f_tol {
        return Ok(start);
    }
    let mut step = 1.0;
    if f0 > 0.0 {
        // root lies above
        let mut lo = start;
        loop {
            let hi = lo + step;
            if hi - start > limit {
                return Err(Error::solver(format!(
                    "no sign change within {limit} above {start}"
                )));
            }
            if f(hi) <= 0.0 {
                return bisect(f, lo, hi, f_tol);
            }
            lo = hi;
            step *= 2.0;
        }
    } else {
        let mut hi = start;
        loop {
            let lo = hi - step;
            if start - lo > limit {
                return Err(Error::solver(format!(
                    "no sign change within {limit} below {start}"
                )));
            }
            if f(lo) >= 0.0 {
                return bisect(f, lo, hi, f_tol);
            }
            hi = lo;
            step *= 2.0;
        }
    }
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`.
/// Returns the abscissa of the maximum to within `x_tol`.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, x_tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (lo, hi);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > x_tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_simple_root() {
        let root = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((root - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bisect_rejects_bad_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn decreasing_bracket_expands_both_ways() {
        // Root above the start.
        let r = bisect_decreasing(|x| 10.0 - x, 0.0, 1e6, 1e-12).unwrap();
        assert!((r - 10.0).abs() < 1e-9);
        // Root below the start.
        let r = bisect_decreasing(|x| -3.0 - x, 0.0, 1e6, 1e-12).unwrap();
        assert!((r + 3.0).abs() < 1e-9);
    }

    #[test]
    fn golden_max_peak() {
        let x = golden_max(|x| -(x - 3.7) * (x - 3.7), 0.0, 10.0, 1e-10);
        assert!((x - 3.7).abs() < 1e-8);
    }
}
