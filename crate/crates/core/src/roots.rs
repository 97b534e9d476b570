//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Stopping rule for a bracketed solve.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Accept once `|f(x)| ≤ f_abs` ...
    pub f_abs: f64,
    /// ... and the bracket width is at most `x_rel·|x|` (or `x_abs`).
    pub x_rel: f64,
    pub x_abs: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            f_abs: 1e-14,
            x_rel: 1e-13,
            x_abs: 1e-300,
            max_iter: 500,
        }
    }
}

/// Brent's method on a bracket `[a, b]` with `f(a)·f(b) ≤ 0`.
///
/// Returns the best iterate once both the residual and the bracket width are
/// inside tolerance, or once the bracket can no longer shrink in floating
/// point.
pub fn brent<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!(
            "root not bracketed: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut bisected = true;

    for _ in 0..tol.max_iter {
        let width = (b - a).abs();
        let x_tol = (tol.x_rel * b.abs()).max(tol.x_abs);
        if fb.abs() <= tol.f_abs && width <= x_tol {
            return Ok(b);
        }
        // bracket exhausted in floating point
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            return Ok(b);
        }

        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };

        let lo = (3.0 * a + b) / 4.0;
        let between = if lo < b {
            s > lo && s < b
        } else {
            s > b && s < lo
        };
        let tiny = x_tol.max(f64::EPSILON * b.abs());
        let reject = !between
            || (bisected && (s - b).abs() >= 0.5 * (b - c).abs())
            || (!bisected && (s - b).abs() >= 0.5 * (c - d).abs())
            || (bisected && (b - c).abs() < tiny)
            || (!bisected && (c - d).abs() < tiny);
        if reject {
            s = mid;
            bisected = true;
        } else {
            bisected = false;
        }

        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
        if fb == 0.0 {
            return Ok(b);
        }
    }
    Err(Error::Numerical(format!(
        "Brent iteration did not converge in {} steps (bracket [{a}, {b}], f = {fb})",
        tol.max_iter
    )))
}

/// Plain bisection for a sign change on `[lo, hi]`, run until the bracket
/// cannot shrink further. `f(lo)` and `f(hi)` must have opposite signs.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numerical(format!(
            "bisection needs a sign change: f({lo}) = {f_lo}, f({hi}) = {f_hi}"
        )));
    }
    let lo_negative = f_lo < 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
