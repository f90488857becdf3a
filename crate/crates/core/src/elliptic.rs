//! Incomplete elliptic integrals of the first and second kind.
//!
//! ```text
//! F(phi, k) = \int_0^phi dt / sqrt(1 - k^2 sin^2 t)
//! E(phi, k) = \int_0^phi sqrt(1 - k^2 sin^2 t) dt
//! ```
//!
//! Both are evaluated through Carlson's symmetric integrals `R_F` and
//! `R_D` (duplication theorem plus a truncated Taylor series), after
//! reducing the amplitude to `[-pi/2, pi/2)` with the quasi-periodicity
//! `F(phi + m pi) = F(phi) + 2m K(k)`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::{Error, Result};

const RF_ERRTOL: f64 = 0.0008;
const RD_ERRTOL: f64 = 0.0005;
// Each duplication shrinks the spread by 4; 100 is far beyond convergence.
const MAX_DUPLICATIONS: usize = 100;

/// Carlson's `R_F(x, y, z)` for non-negative arguments with at most one
/// of them zero.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    let (mut x, mut y, mut z) = (x, y, z);
    for _ in 0..MAX_DUPLICATIONS {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let mean = (x + y + z) / 3.0;
        let dx = (mean - x) / mean;
        let dy = (mean - y) / mean;
        let dz = (mean - z) / mean;
        if dx.abs().max(dy.abs()).max(dz.abs()) <= RF_ERRTOL {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / mean.sqrt();
        }
    }
    f64::NAN
}

/// Carlson's `R_D(x, y, z)`; `x, y >= 0` (not both zero), `z > 0`.
pub fn carlson_rd(x: f64, y: f64, z: f64) -> f64 {
    const C1: f64 = 3.0 / 14.0;
    const C2: f64 = 1.0 / 6.0;
    const C3: f64 = 9.0 / 22.0;
    const C4: f64 = 3.0 / 26.0;
    const C5: f64 = 0.25 * C3;
    const C6: f64 = 1.5 * C4;
    let (mut x, mut y, mut z) = (x, y, z);
    let mut sum = 0.0;
    let mut fac = 1.0;
    for _ in 0..MAX_DUPLICATIONS {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (z + lambda));
        fac *= 0.25;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let mean = 0.2 * (x + y + 3.0 * z);
        let dx = (mean - x) / mean;
        let dy = (mean - y) / mean;
        let dz = (mean - z) / mean;
        if dx.abs().max(dy.abs()).max(dz.abs()) <= RD_ERRTOL {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - 6.0 * eb;
            let ee = ed + ec + ec;
            let series =
                1.0 + ed * (-C1 + C5 * ed - C6 * dz * ee) + dz * (C2 * ee + dz * (-C3 * ec + dz * C4 * ea));
            return 3.0 * sum + fac * series / (mean * mean.sqrt());
        }
    }
    f64::NAN
}

fn check_args(phi: f64, k: f64) -> Result<()> {
    if !phi.is_finite() {
        return Err(Error::Domain {
            func: "elliptic amplitude",
            value: phi,
        });
    }
    check_modulus(k)
}

fn check_modulus(k: f64) -> Result<()> {
    if (0.0..=1.0).contains(&k) {
        Ok(())
    } else {
        Err(Error::ModulusOutOfRange { k })
    }
}

/// Split `phi = m pi + r` with `r` in `[-pi/2, pi/2)`.
fn reduce(phi: f64) -> (f64, f64) {
    let m = ((phi + FRAC_PI_2) / PI).floor();
    (m, phi - m * PI)
}

fn f_reduced(r: f64, k: f64) -> f64 {
    let (s, c) = r.sin_cos();
    s * carlson_rf(c * c, 1.0 - k * k * s * s, 1.0)
}

fn e_reduced(r: f64, k: f64) -> f64 {
    let (s, c) = r.sin_cos();
    let (x, y) = (c * c, 1.0 - k * k * s * s);
    let k2s3 = k * k * s * s * s;
    s * carlson_rf(x, y, 1.0) - k2s3 * carlson_rd(x, y, 1.0) / 3.0
}

/// Complete integral of the first kind, `K(k) = F(pi/2, k)`.
pub fn complete_k(k: f64) -> Result<f64> {
    check_modulus(k)?;
    if k == 1.0 {
        return Err(Error::DivergentElliptic { phi: FRAC_PI_2 });
    }
    Ok(carlson_rf(0.0, 1.0 - k * k, 1.0))
}

/// Complete integral of the second kind, `E(k) = E(pi/2, k)`.
pub fn complete_e(k: f64) -> Result<f64> {
    check_modulus(k)?;
    if k == 1.0 {
        return Ok(1.0);
    }
    let y = 1.0 - k * k;
    Ok(carlson_rf(0.0, y, 1.0) - k * k * carlson_rd(0.0, y, 1.0) / 3.0)
}

pub fn ellip_f(phi: f64, k: f64) -> Result<f64> {
    check_args(phi, k)?;
    if k == 1.0 {
        if phi.abs() >= FRAC_PI_2 {
            return Err(Error::DivergentElliptic { phi });
        }
        return Ok(f_reduced(phi, k));
    }
    if phi.abs() < FRAC_PI_2 {
        return Ok(f_reduced(phi, k));
    }
    let (m, r) = reduce(phi);
    Ok(2.0 * m * complete_k(k)? + f_reduced(r, k))
}

pub fn ellip_e(phi: f64, k: f64) -> Result<f64> {
    check_args(phi, k)?;
    if phi.abs() < FRAC_PI_2 {
        return Ok(e_reduced(phi, k));
    }
    let (m, r) = reduce(phi);
    if k == 1.0 {
        // integrand is |cos t|
        return Ok(2.0 * m + r.sin());
    }
    Ok(2.0 * m * complete_e(k)? + e_reduced(r, k))
}
