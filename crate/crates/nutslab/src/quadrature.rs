//! Adaptive Simpson quadrature and bisection.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("quadrature did not reach tolerance {tol} on [{a}, {b}]")]
    QuadratureTolerance { a: f64, b: f64, tol: f64 },
    #[error("non-finite integrand value at t = {0}")]
    NonFiniteIntegrand(f64),
    #[error("no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
}

const MAX_LEVEL: u32 = 60;

struct Simpson<F> {
    f: F,
    failed: Option<NumericError>,
}

impl<F: Fn(f64) -> f64> Simpson<F> {
    fn eval(&mut self, t: f64) -> f64 {
        let y = (self.f)(t);
        if !y.is_finite() && self.failed.is_none() {
            self.failed = Some(NumericError::NonFiniteIntegrand(t));
        }
        y
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, level: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (self.eval(lm), self.eval(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol || self.failed.is_some() {
            return left + right + err / 15.0;
        }
        if level >= MAX_LEVEL {
            self.failed = Some(NumericError::QuadratureTolerance { a, b, tol });
            return left + right;
        }
        self.recurse(a, m, fa, flm, fm, left, 0.5 * tol, level + 1)
            + self.recurse(m, b, fm, frm, fb, right, 0.5 * tol, level + 1)
    }
}

/// ∫_a^b f with absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, NumericError> {
    if a == b {
        return Ok(0.0);
    }
    let mut s = Simpson { f, failed: None };
    let (fa, fb, fm) = (s.eval(a), s.eval(b), s.eval(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let v = s.recurse(a, b, fa, fm, fb, whole, tol, 0);
    match s.failed {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// ∫ over consecutive breakpoints, each piece to tolerance `tol / pieces`.
pub fn integrate_pieces(f: impl Fn(f64) -> f64, breaks: &[f64], tol: f64) -> Result<f64, NumericError> {
    let n = breaks.len().saturating_sub(1).max(1) as f64;
    breaks.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], tol / n)).sum()
}

/// Root of a continuous `f` with a sign change on [lo, hi], to width `tol`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64, NumericError> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(NumericError::NoBracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_smooth_and_kinked_functions() {
        let v = adaptive_simpson(|t| t.sin(), 0.0, PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
        let k = integrate_pieces(|t: f64| t.abs(), &[-1.0, 0.0, 2.0], 1e-12).unwrap();
        assert!((k - 2.5).abs() < 1e-12);
        assert!(adaptive_simpson(|t| 1.0 / t, 0.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn bisection() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }
}
