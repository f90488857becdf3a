//! Bracketed scalar root finding.

use crate::{Error, Result};

/// Root of `f` in `[lo, hi]` by bisection to `xtol`, polished with up to
/// three Newton steps that are kept only when they stay inside the final
/// bracket and reduce `|f|`.
pub fn bisect_newton<F, D>(f: F, df: D, lo: f64, hi: f64, xtol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.signum() != fb.signum()) {
        return Err(Error::RootBracket(format!(
            "f({a}) = {fa} and f({b}) = {fb} do not bracket a root"
        )));
    }
    let sa = fa.signum();
    for _ in 0..400 {
        if b - a <= xtol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    let mut x = 0.5 * (a + b);
    let mut fx = f(x);
    for _ in 0..3 {
        let d = df(x);
        if !(d.is_finite() && d != 0.0) {
            break;
        }
        let cand = x - fx / d;
        if !(cand >= a && cand <= b) {
            break;
        }
        let fc = f(cand);
        if fc.abs() < fx.abs() {
            x = cand;
            fx = fc;
        } else {
            break;
        }
    }
    Ok(x)
}
