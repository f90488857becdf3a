//! Oscillator solutions built from a single radial solution.
//!
//! With `Q = x / rho` and `T = \int dt / (gamma rho^2)`, the
//! Ermakov-Lewis invariant becomes `(dQ/dT)^2 / 2 + J^2 Q^2 / 2`, a
//! harmonic energy in `T`. Hence `x = rho sin(J T + delta)`.

use serde::Serialize;

use crate::integrator::{integrate, Channel, IntegratorConfig, Probes, Trajectory};
use crate::kinematics::EmpState;
use crate::systems::{SystemId, SystemSpec};
use crate::{Error, Result};

/// Tolerance on the initial-data consistency check.
pub const CONSISTENCY_TOL: f64 = 1e-9;

fn component(traj: &Trajectory, name: &'static str) -> Result<Vec<f64>> {
    traj.component(name).ok_or(Error::MissingChannel(name))
}

/// `Q = x / rho` and the accumulated `T` at every sample.
pub fn transform_qt(traj: &Trajectory) -> Result<(Vec<f64>, Vec<f64>)> {
    let t_acc = traj
        .channel(Channel::AccumT)
        .ok_or(Error::MissingChannel(Channel::AccumT.name()))?;
    let x = component(traj, "x")?;
    let rho = component(traj, "rho")?;
    let q = x
        .iter()
        .zip(&rho)
        .map(|(&x, &r)| {
            if r > 0.0 {
                Ok(x / r)
            } else {
                Err(Error::NonPositiveRho { rho: r })
            }
        })
        .collect::<Result<_>>()?;
    Ok((q, t_acc.to_vec()))
}

fn check_j(j: f64) -> Result<()> {
    if j > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveJ { j })
    }
}

/// `x = rho sin(J T + delta)` on the samples of `traj`.
pub fn superpose(traj: &Trajectory, j: f64, delta: f64) -> Result<Vec<f64>> {
    check_j(j)?;
    let t_acc = traj
        .channel(Channel::AccumT)
        .ok_or(Error::MissingChannel(Channel::AccumT.name()))?;
    let rho = component(traj, "rho")?;
    Ok(rho
        .iter()
        .zip(t_acc)
        .map(|(&r, &tt)| r * (j * tt + delta).sin())
        .collect())
}

/// Initial `(x, vx)` matching phase `delta` for the radial data
/// `(rho, rhodot)`: `x = rho sin(delta)`,
/// `vx = rhodot sin(delta) + J cos(delta) / (gamma rho)`.
pub fn consistent_initial_state(spec: &SystemSpec, rho: f64, rhodot: f64, delta: f64) -> Result<EmpState> {
    check_emp(spec)?;
    let y = [0.0, 0.0, rho, rhodot];
    let gamma = spec.gamma(&y)?;
    let j = spec.params.j;
    let (s, c) = delta.sin_cos();
    Ok(EmpState {
        t: 0.0,
        x: rho * s,
        vx: rhodot * s + j * c / (gamma * rho),
        rho,
        rhodot,
    })
}

fn check_emp(spec: &SystemSpec) -> Result<()> {
    match spec.id {
        SystemId::RelEmp => Ok(()),
        SystemId::NrEmp if spec.params.emp_constant() == spec.params.j * spec.params.j => Ok(()),
        id => Err(Error::InvalidParameter(format!(
            "superposition needs REL_EMP (or NR_EMP with C = J^2), got {id}"
        ))),
    }
}

/// Time-grid samples of `(dQ/dT)^2/2 + J^2 Q^2/2`, with `dQ/dt` from
/// fourth-order central differences and `dT/dt = 1/(gamma rho^2)`.
/// Only interior samples whose stencil is uniformly spaced are included.
pub fn transformed_invariant(traj: &Trajectory, spec: &SystemSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let (q, _) = transform_qt(traj)?;
    let j = spec.params.j;
    let t = &traj.t;
    let mut ts = Vec::new();
    let mut vals = Vec::new();
    for i in 2..t.len().saturating_sub(2) {
        let h = t[i + 1] - t[i];
        let uniform = (-2..2).all(|k: isize| {
            let a = (i as isize + k) as usize;
            ((t[a + 1] - t[a]) - h).abs() <= 1e-9 * h
        });
        if !uniform {
            continue;
        }
        let dq_dt = (q[i - 2] - 8.0 * q[i - 1] + 8.0 * q[i + 1] - q[i + 2]) / (12.0 * h);
        let y = &traj.states[i];
        let rho = y[2];
        let dq_dtt = dq_dt * spec.gamma(y)? * rho * rho;
        ts.push(t[i]);
        vals.push(0.5 * dq_dtt * dq_dtt + 0.5 * j * j * q[i] * q[i]);
    }
    Ok((ts, vals))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperpositionResult {
    pub delta: f64,
    pub t: Vec<f64>,
    pub x_reference: Vec<f64>,
    pub x_reconstructed: Vec<f64>,
    pub max_deviation: f64,
    /// Largest deviation of the transformed invariant from `J^2/2`.
    pub invariant_deviation: f64,
}

/// Integrate from `init = (x, vx, rho, rhodot)` and compare the
/// integrated `x` with the one rebuilt from `rho` and phase `delta`.
pub fn verify_superposition(
    spec: &SystemSpec,
    init: &[f64],
    delta: f64,
    cfg: &IntegratorConfig,
) -> Result<SuperpositionResult> {
    check_emp(spec)?;
    check_j(spec.params.j)?;
    let expect = consistent_initial_state(spec, init[2], init[3], delta)?;
    let mismatch = (init[0] - expect.x).abs().max((init[1] - expect.vx).abs());
    if !(mismatch <= CONSISTENCY_TOL) {
        return Err(Error::InconsistentInitialData { mismatch });
    }
    let traj = integrate(spec, 0.0, init, cfg, &Probes::channels(&[Channel::AccumT]))?;
    let x_reference = component(&traj, "x")?;
    let x_reconstructed = superpose(&traj, spec.params.j, delta)?;
    let max_deviation = x_reference
        .iter()
        .zip(&x_reconstructed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let half_j2 = 0.5 * spec.params.j.powi(2);
    let (_, inv) = transformed_invariant(&traj, spec)?;
    let invariant_deviation = inv.iter().map(|v| (v - half_j2).abs()).fold(0.0, f64::max);
    Ok(SuperpositionResult {
        delta,
        t: traj.t,
        x_reference,
        x_reconstructed,
        max_deviation,
        invariant_deviation,
    })
}
