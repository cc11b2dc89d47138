//! Bracketed bisection used by every solver in the crate.

use crate::error::Error;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_ITER: usize = 200;

/// Finds a root of `f` on `[lo, hi]` by bisection.
///
/// The endpoints must have opposite signs (or one of them must be a root).
/// Iteration stops once the bracket is narrower than `tol` or after
/// [`MAX_ITER`] halvings.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, Error>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::FixedPointFailure { lo, hi, f_lo: fa, f_hi: fb });
    }
    let a_negative = fa < 0.0;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (a + b);
        if (b - a) <= tol || mid <= a || mid >= b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == a_negative {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
