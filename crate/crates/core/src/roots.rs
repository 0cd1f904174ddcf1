//! Safeguarded Newton iteration for monotone scalar equations.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Required absolute residual at termination.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Finds a root of a monotone `f` inside `[lo, hi]`.
///
/// `f` returns `(value, derivative)`. The endpoints must bracket a sign
/// change. Newton steps that leave the current bracket (or a zero
/// derivative) fall back to bisection. Iteration continues past the
/// residual tolerance until the step is at the level of rounding, so the
/// returned root is as smooth in its inputs as the arithmetic allows.
pub fn newton_bracketed<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    guess: f64,
    opts: RootOptions,
) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (f_lo, _) = f(lo);
    let (f_hi, _) = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::domain(format!(
            "root not bracketed: f({lo})={f_lo}, f({hi})={f_hi}"
        )));
    }
    let increasing = f_hi > 0.0;

    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    let mut best = (f64::INFINITY, x);
    for _ in 0..opts.max_iter {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.abs() < best.0 {
            best = (fx.abs(), x);
        }
        if (fx > 0.0) == increasing {
            hi = x;
        } else {
            lo = x;
        }

        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        let scale = x.abs().max(next.abs());
        x = next;
        if fx.abs() < opts.tol
            && (step <= 4.0 * f64::EPSILON * scale || hi - lo <= 4.0 * f64::EPSILON * scale)
        {
            return Ok(x);
        }
        if hi - lo <= f64::EPSILON * scale.max(f64::MIN_POSITIVE) && fx.abs() < opts.tol {
            return Ok(x);
        }
    }
    if best.0 < opts.tol {
        return Ok(best.1);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: best.0,
    })
}

/// Doubles `start` until `pred` fails; returns the first value where it does.
pub(crate) fn expand_upper<P>(start: f64, mut pred: P) -> Result<f64>
where
    P: FnMut(f64) -> bool,
{
    let mut hi = start;
    for _ in 0..2100 {
        if !pred(hi) {
            return Ok(hi);
        }
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: 2100,
        residual: f64::NAN,
    })
}

/// Adaptive Simpson quadrature on a finite interval.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }

    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&f, a, b, fa, fm, fb, whole, tol, 50)
}
