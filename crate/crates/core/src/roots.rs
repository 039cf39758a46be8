//! Bracketed scalar root finders.

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

fn converged(a: f64, b: f64) -> bool {
    (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0)
}

/// Newton's method kept inside a sign-changing bracket `[a, b]`; any step
/// leaving the bracket or shrinking it too slowly is replaced by bisection.
pub fn newton_bracketed<F>(mut f: F, mut a: f64, mut b: f64, x0: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (fa, _) = f(a)?;
    let (fb, _) = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket(format!("no sign change on [{a}, {b}] ({fa:e}, {fb:e})")));
    }
    let sa = fa.signum();
    let mut x = if x0 > a && x0 < b { x0 } else { 0.5 * (a + b) };
    let mut ref_width = b - a;
    let mut since = 0;
    for _ in 0..MAX_ITER {
        let (fx, dfx) = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == sa {
            a = x;
        } else {
            b = x;
        }
        let newton = x - fx / dfx;
        let step_ok = dfx != 0.0 && newton.is_finite() && newton > a && newton < b;
        // Force a bisection when three steps failed to halve the bracket.
        since += 1;
        let stalled = since >= 3 && b - a > 0.5 * ref_width;
        if since >= 3 {
            ref_width = b - a;
            since = 0;
        }
        let next = if step_ok && !stalled { newton } else { 0.5 * (a + b) };
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1.0) || converged(a, b) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Convergence(format!("newton on [{a}, {b}]")))
}

/// Brent's method on a sign-changing bracket.
pub fn brent<F>(mut f: F, a: f64, b: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket(format!("no sign change on [{a}, {b}] ({fa:e}, {fb:e})")));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..MAX_ITER {
        if fb == 0.0 || converged(b, c) && converged(a, b) {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let tol = 2.0 * f64::EPSILON * b.abs().max(1.0);
        let outside = !((s > lo.min(b)) && (s < lo.max(b)));
        if outside
            || (bisected && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!bisected && (s - b).abs() >= (c - d).abs() / 2.0)
            || (bisected && (b - c).abs() < tol)
            || (!bisected && (c - d).abs() < tol)
        {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s)?;
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
        if converged(a, b) {
            return Ok(b);
        }
    }
    Err(Error::Convergence(format!("brent on [{a}, {b}]")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_roots() {
        let r = newton_bracketed(|x| Ok((x * x * x - 2.0, 3.0 * x * x)), 0.0, 3.0, 2.5).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-15);
        let r = brent(|x| Ok(x.cos() - x), 0.0, 1.0).unwrap();
        assert!((r.cos() - r).abs() < 1e-15);
        assert!(brent(|x| Ok(x * x + 1.0), -1.0, 1.0).is_err());
    }

    #[test]
    fn newton_survives_bad_derivative() {
        let r = newton_bracketed(|x| Ok((x.atan(), 1e-30)), -1.0, 10.0, 9.0).unwrap();
        assert!(r.abs() < 1e-14);
    }
}
