//! State types and Lorentz factors.
//!
//! All quantities are dimensionless. The reference speed `c` is carried in
//! [`RelParams`]; choosing `c = 1` and unit frequency gives the rescaled
//! variables used by the conservative analysis.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// States with `(v/c)^2 > 1 - GUARD_BAND` are treated as superluminal.
pub const GUARD_BAND: f64 = 1e-12;

/// Full planar phase state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl CartState {
    pub fn from_slice(t: f64, y: &[f64]) -> Self {
        CartState {
            t,
            x: y[0],
            y: y[1],
            vx: y[2],
            vy: y[3],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.x, self.y, self.vx, self.vy]
    }

    /// `rho * rhodot = x vx + y vy`.
    pub fn rho_rhodot(&self) -> f64 {
        self.x * self.vx + self.y * self.vy
    }

    pub fn rho(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Kinematic angular momentum `x vy - y vx` (without the Lorentz factor).
    pub fn areal_rate(&self) -> f64 {
        self.x * self.vy - self.y * self.vx
    }
}

/// Closed state of the relativistic EMP pair: the auxiliary coordinate `x`
/// and the radial coordinate `rho`, with their rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpState {
    pub t: f64,
    pub x: f64,
    pub vx: f64,
    pub rho: f64,
    pub rhodot: f64,
}

impl EmpState {
    pub fn from_slice(t: f64, y: &[f64]) -> Self {
        EmpState {
            t,
            x: y[0],
            vx: y[1],
            rho: y[2],
            rhodot: y[3],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.x, self.vx, self.rho, self.rhodot]
    }

    /// Build the `(x, vx, rho, rhodot)` state of a planar motion given in
    /// polar form, projecting on the x axis.
    pub fn from_polar(p: &PolarState, j: f64, c: f64) -> Result<Self> {
        let cart = polar_to_cart(p, j, c)?;
        Ok(EmpState {
            t: p.t,
            x: cart.x,
            vx: cart.vx,
            rho: p.rho,
            rhodot: p.rhodot,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub t: f64,
    pub rho: f64,
    pub rhodot: f64,
    pub theta: f64,
}

/// Reference speed, angular momentum and the constant of the
/// non-relativistic EMP equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelParams {
    pub c: f64,
    #[serde(rename = "J")]
    pub j: f64,
    /// `C` in `rho'' + kappa^2 rho = C / rho^3`. When absent, `C = J^2`.
    #[serde(rename = "Cemp", skip_serializing_if = "Option::is_none")]
    pub cemp: Option<f64>,
}

impl Default for RelParams {
    fn default() -> Self {
        RelParams {
            c: 1.0,
            j: 0.0,
            cemp: None,
        }
    }
}

impl RelParams {
    pub fn new(c: f64, j: f64) -> Result<Self> {
        let p = RelParams { c, j, cemp: None };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "reference speed c must be positive and finite, got {}",
                self.c
            )));
        }
        if !self.j.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "J must be finite, got {}",
                self.j
            )));
        }
        Ok(())
    }

    /// The constant `C` of the non-relativistic EMP equation.
    pub fn emp_constant(&self) -> f64 {
        self.cemp.unwrap_or(self.j * self.j)
    }
}

fn check_subluminal(beta_sq: f64) -> Result<()> {
    // NaN fails the comparison and is rejected with the rest.
    if beta_sq <= 1.0 - GUARD_BAND {
        Ok(())
    } else {
        Err(Error::Superluminal { beta_sq })
    }
}

pub fn gamma_cart(vx: f64, vy: f64, c: f64) -> Result<f64> {
    let beta_sq = (vx * vx + vy * vy) / (c * c);
    check_subluminal(beta_sq)?;
    Ok(1.0 / (1.0 - beta_sq).sqrt())
}

pub fn gamma_axis(v: f64, c: f64) -> Result<f64> {
    let beta_sq = v * v / (c * c);
    check_subluminal(beta_sq)?;
    Ok(1.0 / (1.0 - beta_sq).sqrt())
}

/// Lorentz factor of a planar motion with angular momentum `j`, written in
/// terms of the radial variables only.
pub fn gamma_polar(rho: f64, rhodot: f64, j: f64, c: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::NonPositiveRho { rho });
    }
    let radial = rhodot * rhodot / (c * c);
    check_subluminal(radial)?;
    let gamma_sq = (1.0 + j * j / (c * c * rho * rho)) / (1.0 - radial);
    // total (v/c)^2 = 1 - 1/gamma^2
    check_subluminal(1.0 - 1.0 / gamma_sq)?;
    Ok(gamma_sq.sqrt())
}

/// Convert a polar state to Cartesian form. The angular rate follows from
/// `J = gamma rho^2 thetadot` with `gamma` given by [`gamma_polar`].
pub fn polar_to_cart(p: &PolarState, j: f64, c: f64) -> Result<CartState> {
    let gamma = gamma_polar(p.rho, p.rhodot, j, c)?;
    let thetadot = j / (gamma * p.rho * p.rho);
    let (s, co) = p.theta.sin_cos();
    Ok(CartState {
        t: p.t,
        x: p.rho * co,
        y: p.rho * s,
        vx: p.rhodot * co - p.rho * thetadot * s,
        vy: p.rhodot * s + p.rho * thetadot * co,
    })
}
