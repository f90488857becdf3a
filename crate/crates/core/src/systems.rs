//! Vector fields of the seven dynamical systems.
//!
//! | id           | state                 | equations                                   |
//! |--------------|-----------------------|---------------------------------------------|
//! | `NR_OSC_2D`  | `x, y, vx, vy`        | isotropic time-dependent oscillator          |
//! | `NR_EMP`     | `x, vx, rho, rhodot`  | x-projection plus the Pinney equation        |
//! | `NR_RR`      | `x, y, vx, vy`        | Ray-Reid couplings `f(y/x)`, `g(x/y)`        |
//! | `REL_OSC_2D` | `x, y, vx, vy`        | relativistic oscillator, disentangled form   |
//! | `REL_EMP`    | `x, vx, rho, rhodot`  | relativistic EMP pair                        |
//! | `REL_RR`     | `x, y, vx, vy`        | relativistic Ray-Reid system                 |
//! | `REL_1D`     | `x, v`                | 1D relativistic oscillator                   |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::exprparse::Expr;
use crate::integrator::{Channel, VectorField};
use crate::kinematics::{gamma_axis, gamma_cart, gamma_polar, CartState, EmpState, RelParams};
use crate::{Error, Result};

/// Below this distance from a coordinate axis the Ray-Reid coupling terms
/// are not evaluated.
pub const AXIS_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemId {
    #[serde(rename = "NR_OSC_2D")]
    NrOsc2d,
    #[serde(rename = "NR_EMP")]
    NrEmp,
    #[serde(rename = "NR_RR")]
    NrRr,
    #[serde(rename = "REL_OSC_2D")]
    RelOsc2d,
    #[serde(rename = "REL_EMP")]
    RelEmp,
    #[serde(rename = "REL_RR")]
    RelRr,
    #[serde(rename = "REL_1D")]
    Rel1d,
}

impl SystemId {
    pub const ALL: [SystemId; 7] = [
        SystemId::NrOsc2d,
        SystemId::NrEmp,
        SystemId::NrRr,
        SystemId::RelOsc2d,
        SystemId::RelEmp,
        SystemId::RelRr,
        SystemId::Rel1d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::NrOsc2d => "NR_OSC_2D",
            SystemId::NrEmp => "NR_EMP",
            SystemId::NrRr => "NR_RR",
            SystemId::RelOsc2d => "REL_OSC_2D",
            SystemId::RelEmp => "REL_EMP",
            SystemId::RelRr => "REL_RR",
            SystemId::Rel1d => "REL_1D",
        }
    }

    pub fn component_names(self) -> &'static [&'static str] {
        match self {
            SystemId::NrOsc2d | SystemId::NrRr | SystemId::RelOsc2d | SystemId::RelRr => {
                &["x", "y", "vx", "vy"]
            }
            SystemId::NrEmp | SystemId::RelEmp => &["x", "vx", "rho", "rhodot"],
            SystemId::Rel1d => &["x", "v"],
        }
    }

    pub fn dim(self) -> usize {
        self.component_names().len()
    }

    pub fn has_couplings(self) -> bool {
        matches!(self, SystemId::NrRr | SystemId::RelRr)
    }

    pub fn is_emp(self) -> bool {
        matches!(self, SystemId::NrEmp | SystemId::RelEmp)
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The squared frequency as a function of the independent variable.
#[derive(Debug, Clone, PartialEq)]
pub enum FreqSpec {
    Constant(f64),
    Expression(Expr),
}

impl FreqSpec {
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            FreqSpec::Constant(v) => Ok(*v),
            FreqSpec::Expression(e) => Ok(e.eval(t)?),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            FreqSpec::Constant(v) => Some(*v),
            FreqSpec::Expression(e) => e.as_constant(),
        }
    }
}

/// Ray-Reid coupling functions `f(s)` and `g(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Couplings {
    pub f: Expr,
    pub g: Expr,
}

impl Couplings {
    pub fn parse(f: &str, g: &str) -> Result<Self> {
        Ok(Couplings {
            f: Expr::parse(f, "s")?,
            g: Expr::parse(g, "s")?,
        })
    }

    /// Both couplings are the constant 0.
    pub fn is_zero(&self) -> bool {
        self.f.as_constant() == Some(0.0) && self.g.as_constant() == Some(0.0)
    }

    /// The forcing terms `f(y/x) / (y x^2)` and `g(x/y) / (x y^2)`.
    /// Vanishing couplings give no forces and no axis restriction.
    pub fn forces(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        if self.is_zero() {
            return Ok((0.0, 0.0));
        }
        if !(x.abs() >= AXIS_THRESHOLD && y.abs() >= AXIS_THRESHOLD) {
            return Err(Error::AxisSingularity { x, y });
        }
        let fx = self.f.eval(y / x)? / (y * x * x);
        let gy = self.g.eval(x / y)? / (x * y * y);
        Ok((fx, gy))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub id: SystemId,
    pub freq: FreqSpec,
    pub couplings: Option<Couplings>,
    pub params: RelParams,
}

impl SystemSpec {
    pub fn new(
        id: SystemId,
        freq: FreqSpec,
        couplings: Option<Couplings>,
        params: RelParams,
    ) -> Result<Self> {
        params.validate()?;
        if id.has_couplings() != couplings.is_some() {
            return Err(Error::InvalidParameter(if id.has_couplings() {
                format!("{id} needs coupling functions f and g")
            } else {
                format!("{id} does not take coupling functions")
            }));
        }
        Ok(SystemSpec {
            id,
            freq,
            couplings,
            params,
        })
    }

    fn couplings(&self) -> Result<&Couplings> {
        self.couplings
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter(format!("{} needs couplings", self.id)))
    }

    /// Lorentz factor of a state vector of this system (1 for the
    /// non-relativistic systems).
    pub fn gamma(&self, y: &[f64]) -> Result<f64> {
        let c = self.params.c;
        match self.id {
            SystemId::NrOsc2d | SystemId::NrEmp | SystemId::NrRr => Ok(1.0),
            SystemId::RelOsc2d | SystemId::RelRr => gamma_cart(y[2], y[3], c),
            SystemId::RelEmp => gamma_polar(y[2], y[3], self.params.j, c),
            SystemId::Rel1d => gamma_axis(y[1], c),
        }
    }

    /// Reject a state outside the state space: superluminal velocity
    /// components, `rho <= 0` for the EMP forms.
    pub fn check_state(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.id.dim() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{} needs {} finite state components",
                self.id,
                self.id.dim()
            )));
        }
        if self.id.is_emp() {
            check_rho(y[2])?;
        }
        if self.id == SystemId::RelEmp {
            // x is a Cartesian coordinate of the planar motion
            gamma_axis(y[1], self.params.c)?;
        }
        self.gamma(y).map(|_| ())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveRho { rho })
    }
}

pub fn rhs_nr_osc_2d(spec: &SystemSpec, s: &CartState) -> Result<[f64; 4]> {
    let k2 = spec.freq.eval(s.t)?;
    Ok([s.vx, s.vy, -k2 * s.x, -k2 * s.y])
}

/// The x-projection `x'' = -kappa^2 x` together with
/// `rho'' = -kappa^2 rho + C / rho^3`.
pub fn rhs_nr_emp(spec: &SystemSpec, s: &EmpState) -> Result<[f64; 4]> {
    check_rho(s.rho)?;
    let k2 = spec.freq.eval(s.t)?;
    let c_emp = spec.params.emp_constant();
    Ok([s.vx, -k2 * s.x, s.rhodot, -k2 * s.rho + c_emp / s.rho.powi(3)])
}

pub fn rhs_nr_rr(spec: &SystemSpec, s: &CartState) -> Result<[f64; 4]> {
    let (fx, gy) = spec.couplings()?.forces(s.x, s.y)?;
    let k2 = spec.freq.eval(s.t)?;
    Ok([s.vx, s.vy, -k2 * s.x + fx, -k2 * s.y + gy])
}

pub fn rhs_rel_osc_2d(spec: &SystemSpec, s: &CartState) -> Result<[f64; 4]> {
    let c = spec.params.c;
    let gamma = gamma_cart(s.vx, s.vy, c)?;
    let gx = gamma_axis(s.vx, c)?;
    let gy = gamma_axis(s.vy, c)?;
    let k2 = spec.freq.eval(s.t)?;
    let a = k2 / gamma;
    let cross = s.vx * s.vy / (c * c);
    Ok([
        s.vx,
        s.vy,
        -a * s.x / (gx * gx) + a * cross * s.y,
        -a * s.y / (gy * gy) + a * cross * s.x,
    ])
}

pub fn rhs_rel_emp(spec: &SystemSpec, s: &EmpState) -> Result<[f64; 4]> {
    check_rho(s.rho)?;
    let RelParams { c, j, .. } = spec.params;
    let gamma = gamma_polar(s.rho, s.rhodot, j, c)?;
    let k2 = spec.freq.eval(s.t)?;
    let a = k2 / gamma;
    let c2 = c * c;
    let xdd = -a * (s.x - s.rho * s.rhodot * s.vx / c2);
    let rdd = -a * (1.0 - s.rhodot * s.rhodot / c2) * s.rho + j * j / (gamma * gamma * s.rho.powi(3));
    Ok([s.vx, xdd, s.rhodot, rdd])
}

/// Accelerations of the relativistic Ray-Reid system for a given `kappa^2`
/// and precomputed coupling forces `(f(y/x)/(y x^2), g(x/y)/(x y^2))`.
pub fn rel_rr_accel(s: &CartState, kappa_sq: f64, forces: (f64, f64), c: f64) -> Result<(f64, f64)> {
    let gamma = gamma_cart(s.vx, s.vy, c)?;
    let (fx, gy) = forces;
    let c2 = c * c;
    let g2 = gamma * gamma;
    let a = kappa_sq / gamma;
    let rrd = s.rho_rhodot();
    let cross = s.vx * s.vy / (g2 * c2);
    let xdd = -a * (s.x - rrd * s.vx / c2) + (1.0 - s.vx * s.vx / c2) * fx / g2 - cross * gy;
    let ydd = -a * (s.y - rrd * s.vy / c2) - cross * fx + (1.0 - s.vy * s.vy / c2) * gy / g2;
    Ok((xdd, ydd))
}

pub fn rhs_rel_rr(spec: &SystemSpec, s: &CartState) -> Result<[f64; 4]> {
    let forces = spec.couplings()?.forces(s.x, s.y)?;
    let k2 = spec.freq.eval(s.t)?;
    let (xdd, ydd) = rel_rr_accel(s, k2, forces, spec.params.c)?;
    Ok([s.vx, s.vy, xdd, ydd])
}

/// `d(gamma v)/dt = -kappa^2 x`, expanded as `v' = -kappa^2 x (1 - v^2/c^2)^{3/2}`.
pub fn rhs_rel_1d(spec: &SystemSpec, t: f64, x: f64, v: f64) -> Result<[f64; 2]> {
    let g = gamma_axis(v, spec.params.c)?;
    let k2 = spec.freq.eval(t)?;
    Ok([v, -k2 * x / (g * g * g)])
}

impl VectorField for SystemSpec {
    fn dim(&self) -> usize {
        self.id.dim()
    }

    fn component_names(&self) -> &[&'static str] {
        self.id.component_names()
    }

    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        match self.id {
            SystemId::Rel1d => {
                dydt.copy_from_slice(&rhs_rel_1d(self, t, y[0], y[1])?);
            }
            SystemId::NrEmp => dydt.copy_from_slice(&rhs_nr_emp(self, &EmpState::from_slice(t, y))?),
            SystemId::RelEmp => dydt.copy_from_slice(&rhs_rel_emp(self, &EmpState::from_slice(t, y))?),
            id => {
                let s = CartState::from_slice(t, y);
                let d = match id {
                    SystemId::NrOsc2d => rhs_nr_osc_2d(self, &s)?,
                    SystemId::NrRr => rhs_nr_rr(self, &s)?,
                    SystemId::RelOsc2d => rhs_rel_osc_2d(self, &s)?,
                    SystemId::RelRr => rhs_rel_rr(self, &s)?,
                    _ => unreachable!(),
                };
                dydt.copy_from_slice(&d);
            }
        }
        Ok(())
    }

    fn channel_rate(&self, channel: Channel, _t: f64, y: &[f64]) -> Result<f64> {
        if !self.id.is_emp() {
            return Err(Error::MissingChannel(channel.name()));
        }
        let rho = y[2];
        check_rho(rho)?;
        let gamma = self.gamma(y)?;
        match channel {
            Channel::AccumT => Ok(1.0 / (gamma * rho * rho)),
            Channel::Theta => Ok(self.params.j / (gamma * rho * rho)),
            Channel::TimeOfTau => Err(Error::MissingChannel(channel.name())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(id: SystemId, k2: f64, c: f64, j: f64, couplings: Option<(&str, &str)>) -> SystemSpec {
        SystemSpec::new(
            id,
            FreqSpec::Constant(k2),
            couplings.map(|(f, g)| Couplings::parse(f, g).unwrap()),
            RelParams { c, j, cemp: None },
        )
        .unwrap()
    }

    fn cart(x: f64, y: f64, vx: f64, vy: f64) -> CartState {
        CartState { t: 0.0, x, y, vx, vy }
    }

    fn emp(x: f64, vx: f64, rho: f64, rhodot: f64) -> EmpState {
        EmpState {
            t: 0.0,
            x,
            vx,
            rho,
            rhodot,
        }
    }

    #[test]
    fn coupling_presence_is_validated() {
        let p = RelParams::default();
        assert!(SystemSpec::new(SystemId::NrRr, FreqSpec::Constant(1.0), None, p).is_err());
        let c = Couplings::parse("1", "1").unwrap();
        assert!(SystemSpec::new(SystemId::RelEmp, FreqSpec::Constant(1.0), Some(c.clone()), p).is_err());
        assert!(SystemSpec::new(SystemId::RelRr, FreqSpec::Constant(1.0), Some(c), p).is_ok());
    }

    #[test]
    fn nr_oscillator() {
        let s = spec(SystemId::NrOsc2d, 1.0, 1.0, 0.0, None);
        assert_eq!(rhs_nr_osc_2d(&s, &cart(0.0, 0.0, 0.0, 0.0)).unwrap(), [0.0; 4]);
        assert_eq!(
            rhs_nr_osc_2d(&s, &cart(1.0, 0.0, 0.0, 0.0)).unwrap()[2..],
            [-1.0, 0.0]
        );
        let s = spec(SystemId::NrOsc2d, 4.0, 1.0, 0.0, None);
        assert_eq!(
            rhs_nr_osc_2d(&s, &cart(1.0, 2.0, 0.0, 0.0)).unwrap()[2..],
            [-4.0, -8.0]
        );
    }

    #[test]
    fn time_dependent_frequency_is_evaluated_at_state_time() {
        let s = SystemSpec::new(
            SystemId::NrOsc2d,
            FreqSpec::Expression(Expr::parse("1 + t", "t").unwrap()),
            None,
            RelParams::default(),
        )
        .unwrap();
        let st = CartState {
            t: 2.0,
            ..cart(1.0, 0.0, 0.0, 0.0)
        };
        assert_eq!(rhs_nr_osc_2d(&s, &st).unwrap()[2], -3.0);
    }

    #[test]
    fn nr_emp() {
        let s = spec(SystemId::NrEmp, 1.0, 1.0, 1.0, None);
        assert_eq!(rhs_nr_emp(&s, &emp(0.0, 0.0, 1.0, 0.0)).unwrap()[3], 0.0);
        let s = spec(SystemId::NrEmp, 1.0, 1.0, 0.0, None);
        assert_eq!(rhs_nr_emp(&s, &emp(0.0, 0.0, 2.0, 0.0)).unwrap()[3], -2.0);
        let s = spec(SystemId::NrEmp, 0.0, 1.0, 2.0, None);
        assert_eq!(rhs_nr_emp(&s, &emp(0.0, 0.0, 1.0, 0.0)).unwrap()[3], 4.0);
        assert!(matches!(
            rhs_nr_emp(&s, &emp(0.0, 0.0, 0.0, 0.0)),
            Err(Error::NonPositiveRho { .. })
        ));
        let explicit = SystemSpec {
            params: RelParams {
                c: 1.0,
                j: 2.0,
                cemp: Some(1.0),
            },
            ..s
        };
        assert_eq!(rhs_nr_emp(&explicit, &emp(0.0, 0.0, 1.0, 0.0)).unwrap()[3], 1.0);
    }

    #[test]
    fn nr_ray_reid() {
        let s = spec(SystemId::NrRr, 1.0, 1.0, 0.0, Some(("1", "0")));
        let d = rhs_nr_rr(&s, &cart(1.0, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!(d[2..], [0.0, -1.0]);
        assert!(matches!(
            rhs_nr_rr(&s, &cart(1e-12, 1.0, 0.0, 0.0)),
            Err(Error::AxisSingularity { .. })
        ));
        let zero = spec(SystemId::NrRr, 1.3, 1.0, 0.0, Some(("0", "0")));
        let osc = spec(SystemId::NrOsc2d, 1.3, 1.0, 0.0, None);
        let st = cart(0.7, -1.1, 0.2, 0.5);
        assert_eq!(rhs_nr_rr(&zero, &st).unwrap(), rhs_nr_osc_2d(&osc, &st).unwrap());
    }

    /// Solves the undisentangled Euler-Lagrange form as a 2x2 linear system.
    fn euler_lagrange_accel(s: &CartState, k2: f64, c: f64) -> (f64, f64) {
        let g = gamma_cart(s.vx, s.vy, c).unwrap();
        let c2 = c * c;
        let a11 = 1.0 - s.vy * s.vy / c2;
        let a12 = s.vx * s.vy / c2;
        let a22 = 1.0 - s.vx * s.vx / c2;
        let b1 = -k2 * s.x / g.powi(3);
        let b2 = -k2 * s.y / g.powi(3);
        let det = a11 * a22 - a12 * a12;
        ((b1 * a22 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det)
    }

    #[test]
    fn rel_oscillator() {
        let s = spec(SystemId::RelOsc2d, 1.0, 1.0, 0.0, None);
        let d = rhs_rel_osc_2d(&s, &cart(0.3, -0.4, 0.0, 0.0)).unwrap();
        assert_eq!(d[2..], [-0.3, 0.4]);
        let st = cart(1.0, 0.0, 0.0, 0.6);
        let d = rhs_rel_osc_2d(&s, &st).unwrap();
        assert!((d[2] + 0.8).abs() < 1e-15);
        assert_eq!(d[3], 0.0);
        let (ax, ay) = euler_lagrange_accel(&st, 1.0, 1.0);
        assert!((d[2] - ax).abs() < 1e-15 && (d[3] - ay).abs() < 1e-15);
    }

    #[test]
    fn rel_emp() {
        let s = spec(SystemId::RelEmp, 1.0, 1.0, 1.0, None);
        let d = rhs_rel_emp(&s, &emp(0.0, 0.0, 1.0, 0.0)).unwrap();
        assert!((d[3] - (-1.0 / 2f64.sqrt() + 0.5)).abs() < 1e-15);
        assert!((d[3] + 0.207107).abs() < 1e-6);
        let nr = spec(SystemId::RelEmp, 1.0, 1e6, 1.0, None);
        assert!(rhs_rel_emp(&nr, &emp(0.0, 0.0, 1.0, 0.0)).unwrap()[3].abs() < 1e-10);
        assert!(matches!(
            rhs_rel_emp(&s, &emp(0.0, 0.0, 1.0, 1.0)),
            Err(Error::Superluminal { .. })
        ));
    }

    #[test]
    fn rel_emp_without_angular_momentum_is_1d() {
        let emp_spec = spec(SystemId::RelEmp, 1.7, 1.0, 0.0, None);
        let one_d = spec(SystemId::Rel1d, 1.7, 1.0, 0.0, None);
        let (x, v) = (0.8, -0.45);
        let d = rhs_rel_emp(&emp_spec, &emp(x, v, x, v)).unwrap();
        let d1 = rhs_rel_1d(&one_d, 0.0, x, v).unwrap();
        assert!((d[1] - d1[1]).abs() < 1e-15);
        assert!((d[3] - d1[1]).abs() < 1e-15);
    }

    #[test]
    fn rel_ray_reid() {
        let s = spec(SystemId::RelRr, 0.0, 1.0, 0.0, Some(("1", "1")));
        let d = rhs_rel_rr(&s, &cart(1.0, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!(d[2..], [1.0, 1.0]);
        assert!(matches!(
            rhs_rel_rr(&s, &cart(1.0, 0.0, 0.0, 0.0)),
            Err(Error::AxisSingularity { .. })
        ));
    }

    #[test]
    fn rel_1d() {
        let s = spec(SystemId::Rel1d, 1.0, 1.0, 0.0, None);
        assert_eq!(rhs_rel_1d(&s, 0.0, 1.0, 0.0).unwrap()[1], -1.0);
        assert!((rhs_rel_1d(&s, 0.0, 1.0, 0.6).unwrap()[1] + 0.512).abs() < 1e-15);
        assert_eq!(rhs_rel_1d(&s, 0.0, 0.0, 0.3).unwrap()[1], 0.0);
        assert!(rhs_rel_1d(&s, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn emp_channels() {
        let s = spec(SystemId::RelEmp, 1.0, 1.0, 1.0, None);
        let y = [0.0, 0.0, 1.0, 0.0];
        let rate = s.channel_rate(Channel::AccumT, 0.0, &y).unwrap();
        assert!((rate - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let osc = spec(SystemId::NrOsc2d, 1.0, 1.0, 0.0, None);
        assert!(osc.channel_rate(Channel::AccumT, 0.0, &y).is_err());
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    proptest! {
        #[test]
        fn rel_ray_reid_without_couplings_is_rel_oscillator(
            x in 0.1f64..2.0, y in -2.0f64..-0.1, vx in -0.6f64..0.6, vy in -0.6f64..0.6, k2 in 0.1f64..3.0
        ) {
            let rr = spec(SystemId::RelRr, k2, 1.0, 0.0, Some(("0", "0")));
            let osc = spec(SystemId::RelOsc2d, k2, 1.0, 0.0, None);
            let st = cart(x, y, vx, vy);
            let a = rhs_rel_rr(&rr, &st).unwrap();
            let b = rhs_rel_osc_2d(&osc, &st).unwrap();
            for i in 0..4 {
                prop_assert!(close(a[i], b[i], 1e-14));
            }
            let (ax, ay) = euler_lagrange_accel(&st, k2, 1.0);
            prop_assert!(close(b[2], ax, 1e-13) && close(b[3], ay, 1e-13));
        }

        #[test]
        fn relativistic_systems_tend_to_newtonian(
            x in 0.2f64..2.0, y in 0.2f64..2.0, vx in -0.9f64..0.9, vy in -0.9f64..0.9, k2 in 0.1f64..3.0, j in 0.1f64..2.0
        ) {
            let c = 1e8;
            let st = cart(x, y, vx, vy);
            let rel = rhs_rel_osc_2d(&spec(SystemId::RelOsc2d, k2, c, 0.0, None), &st).unwrap();
            let nr = rhs_nr_osc_2d(&spec(SystemId::NrOsc2d, k2, c, 0.0, None), &st).unwrap();
            for i in 0..4 { prop_assert!(close(rel[i], nr[i], 1e-9)); }

            let rel = rhs_rel_rr(&spec(SystemId::RelRr, k2, c, 0.0, Some(("1 + s", "2*s"))), &st).unwrap();
            let nr = rhs_nr_rr(&spec(SystemId::NrRr, k2, c, 0.0, Some(("1 + s", "2*s"))), &st).unwrap();
            for i in 0..4 { prop_assert!(close(rel[i], nr[i], 1e-9)); }

            let es = emp(x, vx, y, vy);
            let rel = rhs_rel_emp(&spec(SystemId::RelEmp, k2, c, j, None), &es).unwrap();
            let nr = rhs_nr_emp(&spec(SystemId::NrEmp, k2, c, j, None), &es).unwrap();
            for i in 0..4 { prop_assert!(close(rel[i], nr[i], 1e-9)); }
        }

        #[test]
        fn rel_ray_reid_swap_symmetry(
            x in 0.2f64..2.0, y in 0.2f64..2.0, vx in -0.6f64..0.6, vy in -0.6f64..0.6, k2 in 0.1f64..3.0
        ) {
            let a = spec(SystemId::RelRr, k2, 1.0, 0.0, Some(("1 + s", "s*s")));
            let b = spec(SystemId::RelRr, k2, 1.0, 0.0, Some(("s*s", "1 + s")));
            let da = rhs_rel_rr(&a, &cart(x, y, vx, vy)).unwrap();
            let db = rhs_rel_rr(&b, &cart(y, x, vy, vx)).unwrap();
            prop_assert!(close(da[2], db[3], 1e-14));
            prop_assert!(close(da[3], db[2], 1e-14));
        }
    }
}
