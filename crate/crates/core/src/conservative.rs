//! Autonomous (constant-frequency) motions in rescaled variables.
//!
//! With `c = 1` and unit frequency, the 1D oscillator conserves
//! `H_1D = gamma + x^2/2` and the radial REMP motion conserves
//! `H = gamma + rho^2/2`. Either law can be written as
//! `v^2/2 + V = 0` with a pseudo-potential `V`, whose zeros are the
//! return points of the motion.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{ellip_e, ellip_f};
use crate::quadrature;
use crate::roots::bisect_newton;
use crate::{Error, Result};

/// `V_1D = -1/2 + 1 / (2 (H - x^2/2)^2)` on `x^2 < 2H`.
pub fn v1d(x: f64, h: f64) -> Result<f64> {
    let s = h - 0.5 * x * x;
    if !(s > 0.0) {
        return Err(Error::Domain {
            func: "V_1D",
            value: x,
        });
    }
    Ok(-0.5 + 0.5 / (s * s))
}

pub fn return_points_1d(h: f64) -> Result<(f64, f64)> {
    check_energy(h)?;
    let a = (2.0 * (h - 1.0)).sqrt();
    Ok((-a, a))
}

/// Amplitude of the 1D motion with energy `h`.
pub fn amplitude_1d(h: f64) -> Result<f64> {
    Ok(return_points_1d(h)?.1)
}

fn check_energy(h: f64) -> Result<()> {
    if h >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("energy must be >= 1, got {h}")))
    }
}

/// `V = -1/2 + (1 + J^2/rho^2) / (2 (H - rho^2/2)^2)` on `0 < rho < sqrt(2H)`.
pub fn v_rel_emp(rho: f64, h: f64, j: f64) -> Result<f64> {
    let s = h - 0.5 * rho * rho;
    if !(rho > 0.0 && s > 0.0) {
        return Err(Error::Domain {
            func: "V",
            value: rho,
        });
    }
    Ok(-0.5 + 0.5 * (1.0 + j * j / (rho * rho)) / (s * s))
}

/// `dV/drho`.
pub fn dv_rel_emp(rho: f64, h: f64, j: f64) -> f64 {
    let s = h - 0.5 * rho * rho;
    let n = 1.0 + j * j / (rho * rho);
    -j * j / (rho.powi(3) * s * s) + n * rho / s.powi(3)
}

/// Minimum of [`v_rel_emp`]; zero (degenerate) for `J = 0`.
pub fn rho_star(h: f64, j: f64) -> f64 {
    let j2 = j * j;
    0.5 * (-3.0 * j2 + (9.0 * j2 * j2 + 16.0 * j2 * h).sqrt()).sqrt()
}

/// Largest `J^2` admitting oscillations at energy `h`.
pub fn periodicity_bound(h: f64) -> f64 {
    let q = 3.0 + h * h;
    // q sqrt(q) rather than q^1.5 so that F(1) = 0 exactly
    (4.0 / 27.0) * (-9.0 * h + h * h * h + q * q.sqrt())
}

/// Time to reach phase `phi`, with `x = A sin(phi)`, for the 1D motion
/// of amplitude `a`.
pub fn quadrature_time_1d(phi: f64, a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "amplitude must be >= 0, got {a}"
        )));
    }
    let r = (4.0 + a * a).sqrt();
    let k = a / r;
    Ok(r * ellip_e(phi, k)? - (2.0 / r) * ellip_f(phi, k)?)
}

/// Period of the 1D motion of amplitude `a`.
pub fn period_1d(a: f64) -> Result<f64> {
    quadrature_time_1d(TAU, a)
}

/// Small-amplitude period `2 pi (1 + 3A^2/16)`.
pub fn period_series(a: f64) -> f64 {
    TAU * (1.0 + 3.0 * a * a / 16.0)
}

/// Small-amplitude phase at time `t` for a motion with `x(t0) = 0`.
pub fn phase_series(t: f64, t0: f64, a: f64) -> f64 {
    let tau = t - t0;
    tau - (3.0 * a * a / 32.0) * (2.0 * tau + (2.0 * tau).sin())
}

/// `rho^2 (H - rho^2/2)^2 - rho^2 - J^2` as a cubic in `u = rho^2`;
/// positive exactly where `V < 0`.
fn radial_cubic(u: f64, h: f64, j2: f64) -> f64 {
    let s = h - 0.5 * u;
    u * s * s - u - j2
}

fn radial_cubic_du(u: f64, h: f64) -> f64 {
    let s = h - 0.5 * u;
    s * s - u * s - 1.0
}

fn check_oscillation(h: f64, j: f64) -> Result<()> {
    check_energy(h)?;
    let bound = periodicity_bound(h);
    if j * j < bound {
        Ok(())
    } else {
        Err(Error::NoOscillation { j_sq: j * j, bound })
    }
}

/// Inner and outer return points of the radial motion.
pub fn return_points_rel_emp(h: f64, j: f64) -> Result<(f64, f64)> {
    check_oscillation(h, j)?;
    let j2 = j * j;
    if j2 == 0.0 {
        return Ok((0.0, (2.0 * (h - 1.0)).sqrt()));
    }
    let u_star = rho_star(h, j).powi(2);
    let f = |u: f64| radial_cubic(u, h, j2);
    let df = |u: f64| radial_cubic_du(u, h);
    let tol = 1e-15 * h;
    let u_minus = bisect_newton(f, df, 0.0, u_star, tol)?;
    let u_plus = bisect_newton(f, df, u_star, 2.0 * h, tol)?;
    Ok((u_minus.sqrt(), u_plus.sqrt()))
}

/// Period of the radial oscillation, `2 \int drho / sqrt(-2V)` between the
/// return points.
///
/// Writing `-2V = (u - u-)(u+ - u)(u3 - u) / (4 u (H - u/2)^2)` with
/// `u = rho^2` and `u3 = 4H - u- - u+`, the substitution
/// `rho = rho- + (rho+ - rho-) sin^2(psi)` leaves a smooth integrand on
/// `[0, pi/2]`.
pub fn period_rel_emp(h: f64, j: f64) -> Result<f64> {
    let (rm, rp) = return_points_rel_emp(h, j)?;
    let (um, up) = (rm * rm, rp * rp);
    let u3 = 4.0 * h - um - up;
    let delta = rp - rm;
    let integrand = |psi: f64| -> Result<f64> {
        let rho = rm + delta * psi.sin().powi(2);
        let u = rho * rho;
        let s = h - 0.5 * u;
        Ok(8.0 * rho * s / ((rho + rm) * (rp + rho) * (u3 - u)).sqrt())
    };
    quadrature::integrate(integrand, 0.0, FRAC_PI_2, 1e-14, 1e-14)
}

/// Sampled pseudo-potential with its return points and equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialProfile {
    pub coordinate: Vec<f64>,
    pub potential: Vec<f64>,
    pub return_points: (f64, f64),
    pub equilibrium: f64,
    pub v_equilibrium: f64,
}

/// `V_1D` at `n` points spanning `(-sqrt(2H), sqrt(2H))`, symmetric about 0.
pub fn profile_1d(h: f64, n: usize) -> Result<PotentialProfile> {
    let return_points = return_points_1d(h)?;
    let edge = (2.0 * h).sqrt() * (1.0 - 1e-3);
    let n = n.max(3) | 1;
    let coordinate: Vec<f64> = (0..n)
        .map(|i| edge * (-1.0 + 2.0 * i as f64 / (n - 1) as f64))
        .collect();
    let potential = coordinate.iter().map(|&x| v1d(x, h)).collect::<Result<_>>()?;
    Ok(PotentialProfile {
        coordinate,
        potential,
        return_points,
        equilibrium: 0.0,
        v_equilibrium: v1d(0.0, h)?,
    })
}

/// `V` at `n` interior points of `(0, sqrt(2H))`.
pub fn profile_rel_emp(h: f64, j: f64, n: usize) -> Result<PotentialProfile> {
    let return_points = return_points_rel_emp(h, j)?;
    let edge = (2.0 * h).sqrt();
    let coordinate: Vec<f64> = (1..=n).map(|i| edge * i as f64 / (n + 1) as f64).collect();
    let potential = coordinate
        .iter()
        .map(|&r| v_rel_emp(r, h, j))
        .collect::<Result<_>>()?;
    let equilibrium = rho_star(h, j);
    let v_equilibrium = if equilibrium > 0.0 {
        v_rel_emp(equilibrium, h, j)?
    } else {
        // J = 0: the minimum sits at the origin
        v1d(0.0, h)?
    };
    Ok(PotentialProfile {
        coordinate,
        potential,
        return_points,
        equilibrium,
        v_equilibrium,
    })
}

/// Tolerance on `J^2 <= F(H)` in the scan; circular orbits sit exactly
/// on the bound.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub index: usize,
    pub rho: f64,
    pub v: f64,
    pub j: f64,
    pub h: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Energy, periodicity bound and verdict for one rescaled initial
/// condition `(rho, v)` with angular momentum `j`.
pub fn check_initial_condition(rho: f64, v: f64, j: f64) -> Result<(f64, f64, bool)> {
    if !(rho.is_finite() && v.is_finite() && j.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "non-finite initial condition ({rho}, {v}, {j})"
        )));
    }
    let h = crate::invariants::energy_rel_emp(rho, v, j)?;
    let bound = periodicity_bound(h);
    let satisfied = j * j <= bound * (1.0 + BOUND_SLACK) + f64::MIN_POSITIVE;
    Ok((h, bound, satisfied))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub n: usize,
    pub seed: u64,
    pub h_max: f64,
    pub satisfied: usize,
    pub fraction: f64,
    pub failures: Vec<usize>,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub summary: ScanSummary,
    pub samples: Vec<ScanSample>,
}

pub const DEFAULT_SCAN_H_MAX: f64 = 3.0;

/// Worker cap from `REMP_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("REMP_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Draw `n` valid initial conditions and test `J^2 <= F(H)` on each.
///
/// `rho` is uniform in `(0.05, sqrt(2 h_max) - 0.05)` and `v` in
/// `(-0.95, 0.95)`; the angular rate is `u sqrt(1 - v^2) / rho` with `u`
/// uniform in `(-0.95, 0.95)`, which keeps the total speed below 1.
/// Draws that fail validation are redrawn and counted as rejected.
pub fn periodicity_scan(n: usize, seed: u64, h_max: f64) -> Result<ScanResult> {
    if n == 0 {
        return Err(Error::InvalidParameter("scan needs n >= 1".into()));
    }
    let rho_hi = (2.0 * h_max).sqrt() - 0.05;
    if !(rho_hi > 0.05) {
        return Err(Error::InvalidParameter(format!(
            "h_max = {h_max} leaves no radial range"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(n);
    let mut rejected = 0;
    while draws.len() < n {
        let rho: f64 = rng.gen_range(0.05..rho_hi);
        let v: f64 = rng.gen_range(-0.95..0.95);
        let u: f64 = rng.gen_range(-0.95..0.95);
        let thetadot = u * (1.0 - v * v).sqrt() / rho;
        let beta_sq = v * v + rho * rho * thetadot * thetadot;
        let gamma = 1.0 / (1.0 - beta_sq).sqrt();
        let j = gamma * rho * rho * thetadot;
        if check_initial_condition(rho, v, j).is_ok() {
            draws.push((rho, v, j));
        } else {
            rejected += 1;
        }
    }
    let evaluate = || -> Vec<ScanSample> {
        draws
            .par_iter()
            .enumerate()
            .map(|(index, &(rho, v, j))| {
                let (h, bound, satisfied) = check_initial_condition(rho, v, j).expect("draw validated above");
                ScanSample {
                    index,
                    rho,
                    v,
                    j,
                    h,
                    bound,
                    satisfied,
                }
            })
            .collect()
    };
    let samples = match thread_cap() {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(evaluate),
        None => evaluate(),
    };
    let failures: Vec<usize> = samples.iter().filter(|s| !s.satisfied).map(|s| s.index).collect();
    let satisfied = n - failures.len();
    Ok(ScanResult {
        summary: ScanSummary {
            n,
            seed,
            h_max,
            satisfied,
            fraction: satisfied as f64 / n as f64,
            failures,
            rejected,
        },
        samples,
    })
}

/// Phase `phi` in `[0, 2 pi]` at which `quadrature_time_1d(phi, a) = t`,
/// for `t` within one period.
pub fn invert_quadrature_time_1d(t: f64, a: f64) -> Result<f64> {
    let period = period_1d(a)?;
    let t = t.clamp(0.0, period);
    let r = (4.0 + a * a).sqrt();
    let k = a / r;
    // derivative from the integrands of E and F
    let dt = |phi: f64| {
        let d = (1.0 - k * k * phi.sin().powi(2)).sqrt();
        r * d - 2.0 / (r * d)
    };
    let f = |phi: f64| quadrature_time_1d(phi, a).map(|v| v - t).unwrap_or(f64::NAN);
    bisect_newton(f, dt, 0.0, TAU, 1e-14)
}
