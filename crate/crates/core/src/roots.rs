//! Bracketed one-dimensional root finding.

use crate::error::{Error, Result};

/// Bisection on `[lo, hi]` until the bracket is narrower than `tol`.
///
/// `f(lo)` and `f(hi)` must have opposite signs (or one of them be zero).
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket(format!(
            "f({lo}) = {f_lo} and f({hi}) = {f_hi} do not bracket a root"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expands `hi` geometrically from `start` until `f` changes sign relative to
/// `f(lo)`, then bisects.
pub fn bisect_expanding<F>(f: F, lo: f64, start: f64, limit: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let f_lo = f(lo);
    let mut hi = start;
    while hi <= limit {
        let f_hi = f(hi);
        if f_hi == 0.0 || f_hi.signum() != f_lo.signum() {
            return bisect(&f, lo, hi, tol);
        }
        hi *= 2.0;
    }
    Err(Error::Bracket(format!(
        "no sign change of f on [{lo}, {limit}]"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn expanding_bracket() {
        let r = bisect_expanding(|x| 10.0 - x, 0.0, 0.5, 1e3, 1e-12).unwrap();
        assert!((r - 10.0).abs() < 1e-11);
        assert!(bisect_expanding(|x| 10.0 - x, 0.0, 0.5, 4.0, 1e-12).is_err());
    }
}
