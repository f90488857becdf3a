//! First integrals and their drift along integrated trajectories.

use serde::{Deserialize, Serialize};

use crate::exprparse::Expr;
use crate::integrator::Trajectory;
use crate::kinematics::{gamma_axis, gamma_cart, gamma_polar, CartState, EmpState};
use crate::quadrature;
use crate::systems::{Couplings, SystemId, SystemSpec, AXIS_THRESHOLD};
use crate::{Error, Result};

/// Lower limit of the coupling antiderivatives.
pub const DEFAULT_LOWER_LIMIT: f64 = 1.0;

/// Floor of the relative-drift denominator.
pub const DRIFT_FLOOR: f64 = 1e-12;

const QUAD_ABS_TOL: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-14;

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveRho { rho })
    }
}

/// `I = [(rho xdot - x rhodot)^2 + J^2 x^2 / rho^2] / 2`.
pub fn ermakov_lewis_nr(x: f64, xdot: f64, rho: f64, rhodot: f64, j: f64) -> Result<f64> {
    check_rho(rho)?;
    let w = rho * xdot - x * rhodot;
    Ok(0.5 * (w * w + j * j * x * x / (rho * rho)))
}

/// Relativistic form, with the Wronskian weighted by the polar Lorentz
/// factor.
pub fn ermakov_lewis_rel(s: &EmpState, j: f64, c: f64) -> Result<f64> {
    check_rho(s.rho)?;
    let gamma = gamma_polar(s.rho, s.rhodot, j, c)?;
    Ok(el_weighted(s.x, s.vx, s.rho, s.rhodot, j, gamma))
}

fn el_weighted(x: f64, xdot: f64, rho: f64, rhodot: f64, j: f64, gamma: f64) -> f64 {
    let w = gamma * (rho * xdot - x * rhodot);
    0.5 * (w * w + j * j * x * x / (rho * rho))
}

/// `\int_lower^{y/x} f + \int_lower^{x/y} g`.
pub fn coupling_potential(x: f64, y: f64, f: &Expr, g: &Expr, lower: f64) -> Result<f64> {
    if f.as_constant() == Some(0.0) && g.as_constant() == Some(0.0) {
        return Ok(0.0);
    }
    if x.abs() < AXIS_THRESHOLD || y.abs() < AXIS_THRESHOLD {
        return Err(Error::AxisSingularity { x, y });
    }
    let part = |e: &Expr, upper: f64| -> Result<f64> {
        if let Some(k) = e.as_constant() {
            return Ok(k * (upper - lower));
        }
        quadrature::integrate(|s| Ok(e.eval(s)?), lower, upper, QUAD_ABS_TOL, QUAD_REL_TOL)
    };
    Ok(part(f, y / x)? + part(g, x / y)?)
}

pub fn rr_invariant(s: &CartState, f: &Expr, g: &Expr) -> Result<f64> {
    rr_invariant_from(s, f, g, DEFAULT_LOWER_LIMIT)
}

pub fn rr_invariant_from(s: &CartState, f: &Expr, g: &Expr, lower: f64) -> Result<f64> {
    let l = s.areal_rate();
    Ok(0.5 * l * l + coupling_potential(s.x, s.y, f, g, lower)?)
}

pub fn rrr_invariant(s: &CartState, f: &Expr, g: &Expr, c: f64) -> Result<f64> {
    rrr_invariant_from(s, f, g, c, DEFAULT_LOWER_LIMIT)
}

pub fn rrr_invariant_from(s: &CartState, f: &Expr, g: &Expr, c: f64, lower: f64) -> Result<f64> {
    let gamma = gamma_cart(s.vx, s.vy, c)?;
    let l = gamma * s.areal_rate();
    Ok(0.5 * l * l + coupling_potential(s.x, s.y, f, g, lower)?)
}

/// Energy of the rescaled 1D oscillator, `(1 - v^2)^{-1/2} + x^2/2`.
pub fn energy_1d(x: f64, v: f64) -> Result<f64> {
    Ok(gamma_axis(v, 1.0)? + 0.5 * x * x)
}

/// Energy of the rescaled conservative REMP radial motion.
pub fn energy_rel_emp(rho: f64, v: f64, j: f64) -> Result<f64> {
    Ok(gamma_polar(rho, v, j, 1.0)? + 0.5 * rho * rho)
}

/// `c^2 sqrt(1 + p^2/c^2) + kappa^2 r^2 / 2` with `p = gamma v`.
pub fn hamiltonian_full(s: &CartState, kappa_sq: f64, c: f64) -> Result<f64> {
    let gamma = gamma_cart(s.vx, s.vy, c)?;
    // sqrt(1 + gamma^2 v^2 / c^2) = gamma
    Ok(c * c * gamma + 0.5 * kappa_sq * (s.x * s.x + s.y * s.y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantKind {
    /// `I` or `I_R`; planar systems use `rho = |r|` and the initial
    /// angular momentum.
    ErmakovLewis,
    /// `I_RR` or `I_RRR`.
    RayReid,
    /// `H_1D` or `H`, in rescaled variables.
    Energy,
    Hamiltonian,
}

impl InvariantKind {
    pub const ALL: [InvariantKind; 4] = [
        InvariantKind::ErmakovLewis,
        InvariantKind::RayReid,
        InvariantKind::Energy,
        InvariantKind::Hamiltonian,
    ];

    /// Column name for `system`, or `None` when the invariant does not apply.
    pub fn name_for(self, system: SystemId) -> Option<&'static str> {
        use SystemId::*;
        match (self, system) {
            (InvariantKind::ErmakovLewis, NrOsc2d | NrEmp) => Some("I"),
            (InvariantKind::ErmakovLewis, RelOsc2d | RelEmp) => Some("I_R"),
            (InvariantKind::RayReid, NrRr) => Some("I_RR"),
            (InvariantKind::RayReid, RelRr) => Some("I_RRR"),
            (InvariantKind::Energy, Rel1d) => Some("H_1D"),
            (InvariantKind::Energy, RelEmp) => Some("H"),
            (InvariantKind::Hamiltonian, RelOsc2d | RelEmp | Rel1d) => Some("Hamiltonian"),
            _ => None,
        }
    }

    /// Invariants evaluated by default for a system.
    pub fn defaults_for(system: SystemId) -> Vec<InvariantKind> {
        use SystemId::*;
        match system {
            NrOsc2d | NrEmp | RelOsc2d | RelEmp => vec![InvariantKind::ErmakovLewis],
            NrRr | RelRr => vec![InvariantKind::RayReid],
            Rel1d => vec![InvariantKind::Energy],
        }
    }
}

/// Evaluates one invariant on state vectors of one system.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    spec: &'a SystemSpec,
    kind: InvariantKind,
    name: &'static str,
    lower: f64,
    /// Angular momentum of planar motions, fixed from the first sample.
    planar_j: Option<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: &'a SystemSpec, kind: InvariantKind) -> Result<Self> {
        let name = kind
            .name_for(spec.id)
            .ok_or_else(|| Error::InapplicableInvariant {
                invariant: format!("{kind:?}"),
                system: spec.id.to_string(),
            })?;
        Ok(Evaluator {
            spec,
            kind,
            name,
            lower: DEFAULT_LOWER_LIMIT,
            planar_j: None,
        })
    }

    pub fn with_lower_limit(mut self, lower: f64) -> Self {
        self.lower = lower;
        self
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Fix the angular momentum used by the planar Ermakov-Lewis form.
    pub fn anchor(&mut self, y0: &[f64]) -> Result<()> {
        if self.kind == InvariantKind::ErmakovLewis
            && matches!(self.spec.id, SystemId::NrOsc2d | SystemId::RelOsc2d)
        {
            let s = CartState::from_slice(0.0, y0);
            self.planar_j = Some(self.spec.gamma(y0)? * s.areal_rate());
        }
        Ok(())
    }

    fn couplings(&self) -> Result<&Couplings> {
        self.spec
            .couplings
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter(format!("{} needs couplings", self.spec.id)))
    }

    /// `kappa / c` for the rescaled energies.
    fn length_scale(&self, t: f64) -> Result<f64> {
        let k2 = self.spec.freq.eval(t)?;
        if !(k2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rescaled energy needs kappa^2 > 0, got {k2} at t = {t}"
            )));
        }
        Ok(k2.sqrt() / self.spec.params.c)
    }

    pub fn value(&self, t: f64, y: &[f64]) -> Result<f64> {
        let p = &self.spec.params;
        let c = p.c;
        match (self.kind, self.spec.id) {
            (InvariantKind::ErmakovLewis, SystemId::NrEmp) => {
                let s = EmpState::from_slice(t, y);
                ermakov_lewis_nr(s.x, s.vx, s.rho, s.rhodot, p.emp_constant().sqrt())
            }
            (InvariantKind::ErmakovLewis, SystemId::RelEmp) => {
                ermakov_lewis_rel(&EmpState::from_slice(t, y), p.j, c)
            }
            (InvariantKind::ErmakovLewis, _) => {
                let s = CartState::from_slice(t, y);
                let rho = s.rho();
                check_rho(rho)?;
                let rhodot = s.rho_rhodot() / rho;
                let j = match self.planar_j {
                    Some(j) => j,
                    None => self.spec.gamma(y)? * s.areal_rate(),
                };
                Ok(el_weighted(s.x, s.vx, rho, rhodot, j, self.spec.gamma(y)?))
            }
            (InvariantKind::RayReid, SystemId::NrRr) => {
                let cp = self.couplings()?;
                rr_invariant_from(&CartState::from_slice(t, y), &cp.f, &cp.g, self.lower)
            }
            (InvariantKind::RayReid, _) => {
                let cp = self.couplings()?;
                rrr_invariant_from(&CartState::from_slice(t, y), &cp.f, &cp.g, c, self.lower)
            }
            (InvariantKind::Energy, SystemId::Rel1d) => {
                let l = self.length_scale(t)?;
                energy_1d(l * y[0], y[1] / c)
            }
            (InvariantKind::Energy, _) => {
                let l = self.length_scale(t)?;
                energy_rel_emp(l * y[2], y[3] / c, l * p.j / c)
            }
            (InvariantKind::Hamiltonian, SystemId::Rel1d) => {
                let k2 = self.spec.freq.eval(t)?;
                Ok(c * c * gamma_axis(y[1], c)? + 0.5 * k2 * y[0] * y[0])
            }
            (InvariantKind::Hamiltonian, SystemId::RelEmp) => {
                let k2 = self.spec.freq.eval(t)?;
                Ok(c * c * gamma_polar(y[2], y[3], p.j, c)? + 0.5 * k2 * y[2] * y[2])
            }
            (InvariantKind::Hamiltonian, _) => {
                let k2 = self.spec.freq.eval(t)?;
                hamiltonian_full(&CartState::from_slice(t, y), k2, c)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub name: String,
    pub reference: f64,
    pub max_abs: f64,
    pub max_rel: f64,
    pub t_at_max: f64,
    pub n: usize,
}

impl DriftReport {
    /// Deviations of `values` from `values[0]`.
    pub fn from_series(name: &str, t: &[f64], values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InsufficientSamples(values.len()));
        }
        let reference = values[0];
        let mut max_abs = 0.0;
        let mut t_at_max = t[0];
        for (&ti, &v) in t.iter().zip(values) {
            let d = (v - reference).abs();
            if d > max_abs || d.is_nan() {
                max_abs = d;
                t_at_max = ti;
            }
        }
        Ok(DriftReport {
            name: name.to_string(),
            reference,
            max_abs,
            max_rel: max_abs / reference.abs().max(DRIFT_FLOOR),
            t_at_max,
            n: values.len(),
        })
    }
}

/// Values of an invariant at every sample of `traj`.
pub fn series(traj: &Trajectory, spec: &SystemSpec, kind: InvariantKind) -> Result<Vec<f64>> {
    series_from(traj, spec, kind, DEFAULT_LOWER_LIMIT)
}

fn series_from(traj: &Trajectory, spec: &SystemSpec, kind: InvariantKind, lower: f64) -> Result<Vec<f64>> {
    let mut ev = Evaluator::new(spec, kind)?.with_lower_limit(lower);
    if let Some(y0) = traj.states.first() {
        ev.anchor(y0)?;
    }
    traj.t
        .iter()
        .zip(&traj.states)
        .map(|(&t, y)| ev.value(t, y))
        .collect()
}

pub fn drift(traj: &Trajectory, spec: &SystemSpec, kind: InvariantKind) -> Result<DriftReport> {
    drift_from(traj, spec, kind, DEFAULT_LOWER_LIMIT)
}

/// [`drift`] with an explicit lower limit for the coupling antiderivatives.
pub fn drift_from(
    traj: &Trajectory,
    spec: &SystemSpec,
    kind: InvariantKind,
    lower: f64,
) -> Result<DriftReport> {
    let name = kind
        .name_for(spec.id)
        .ok_or_else(|| Error::InapplicableInvariant {
            invariant: format!("{kind:?}"),
            system: spec.id.to_string(),
        })?;
    if traj.len() < 2 {
        return Err(Error::InsufficientSamples(traj.len()));
    }
    let values = series_from(traj, spec, kind, lower)?;
    DriftReport::from_series(name, &traj.t, &values)
}
