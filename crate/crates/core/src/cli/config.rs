//! JSON scenario files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::exprparse::Expr;
use crate::integrator::{Channel, Direction, IntegratorConfig, Probes};
use crate::invariants::InvariantKind;
use crate::kinematics::{polar_to_cart, EmpState, PolarState, RelParams};
use crate::systems::{Couplings, FreqSpec, SystemId, SystemSpec};

use super::CliError;

/// A number or an expression text.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NumOrExpr {
    Num(f64),
    Text(String),
}

impl NumOrExpr {
    pub fn to_freq(&self, var: &str) -> Result<FreqSpec, CliError> {
        match self {
            NumOrExpr::Num(v) if v.is_finite() => Ok(FreqSpec::Constant(*v)),
            NumOrExpr::Num(v) => Err(CliError::Config(format!("frequency must be finite, got {v}"))),
            NumOrExpr::Text(s) => {
                let e = Expr::parse(s, var).map_err(|e| CliError::Config(format!("in {s:?}: {e}")))?;
                Ok(match e.as_constant() {
                    Some(v) => FreqSpec::Constant(v),
                    None => FreqSpec::Expression(e),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarInit {
    pub rho: f64,
    pub rhodot: f64,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub component: String,
    #[serde(default = "either")]
    pub direction: Direction,
}

fn either() -> Direction {
    Direction::Either
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub channels: Vec<Channel>,
    /// `None` selects the system's default invariants.
    pub invariants: Option<Vec<InvariantKind>>,
    pub events: Vec<EventConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: Option<SystemId>,
    #[serde(default)]
    pub params: RelParams,
    pub kappa_sq: Option<NumOrExpr>,
    /// Frequency of the rescaled-time system, in the variable `tau`.
    pub omega_sq: Option<NumOrExpr>,
    pub f: Option<String>,
    pub g: Option<String>,
    /// State components by name.
    pub initial: Option<BTreeMap<String, f64>>,
    /// Polar initial data; `J` comes from `params`.
    pub initial_polar: Option<PolarInit>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub outputs: Outputs,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub h_max: Option<f64>,
    /// Phase of the superposition law.
    pub delta: Option<f64>,
    pub tolerance: Option<f64>,
    /// Energy for the potential analyses.
    #[serde(rename = "H")]
    pub energy: Option<f64>,
    /// Energy levels for `fig1` and `fig2`.
    pub levels: Option<Vec<f64>>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn system_id(&self) -> Result<SystemId, CliError> {
        self.system
            .ok_or_else(|| CliError::Config("missing \"system\"".into()))
    }

    pub fn couplings(&self) -> Result<Couplings, CliError> {
        match (&self.f, &self.g) {
            (Some(f), Some(g)) => Couplings::parse(f, g).map_err(CliError::from_config),
            _ => Err(CliError::Config(
                "coupling functions \"f\" and \"g\" are required".into(),
            )),
        }
    }

    pub fn system_spec(&self) -> Result<SystemSpec, CliError> {
        let id = self.system_id()?;
        let freq = self
            .kappa_sq
            .as_ref()
            .map(|k| k.to_freq("t"))
            .transpose()?
            .unwrap_or(FreqSpec::Constant(1.0));
        let couplings = if id.has_couplings() {
            Some(self.couplings()?)
        } else if self.f.is_some() || self.g.is_some() {
            return Err(CliError::Config(format!("{id} does not take coupling functions")));
        } else {
            None
        };
        if self.omega_sq.is_some() {
            return Err(CliError::Config(
                "\"omega_sq\" is only used by rescale-check".into(),
            ));
        }
        SystemSpec::new(id, freq, couplings, self.params).map_err(CliError::from_config)
    }

    /// Initial state vector in the component order of `names`.
    ///
    /// Component values are checked against the state space later, by the
    /// computation itself, so that e.g. a superluminal start is a runtime
    /// failure rather than a schema error.
    pub fn initial_state(&self, id: Option<SystemId>, names: &[&str]) -> Result<Vec<f64>, CliError> {
        match (&self.initial, &self.initial_polar) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "give either \"initial\" or \"initial_polar\", not both".into(),
            )),
            (Some(map), None) => named_state(map, names),
            (None, Some(p)) => {
                let id = id.ok_or_else(|| CliError::Config("\"initial_polar\" needs a system".into()))?;
                let ps = PolarState {
                    t: 0.0,
                    rho: p.rho,
                    rhodot: p.rhodot,
                    theta: p.theta,
                };
                let (j, c) = (self.params.j, self.params.c);
                match id {
                    SystemId::RelEmp | SystemId::NrEmp => {
                        let c = if id == SystemId::NrEmp { f64::INFINITY } else { c };
                        Ok(EmpState::from_polar(&ps, j, c)
                            .map_err(CliError::from_runtime)?
                            .to_vec())
                    }
                    SystemId::NrOsc2d | SystemId::RelOsc2d | SystemId::NrRr | SystemId::RelRr => {
                        let c = if matches!(id, SystemId::NrOsc2d | SystemId::NrRr) {
                            f64::INFINITY
                        } else {
                            c
                        };
                        Ok(polar_to_cart(&ps, j, c).map_err(CliError::from_runtime)?.to_vec())
                    }
                    SystemId::Rel1d => Err(CliError::Config("REL_1D has no polar form".into())),
                }
            }
            (None, None) => Err(CliError::Config("missing \"initial\" state".into())),
        }
    }

    pub fn probes(&self, names: &[&str]) -> Result<Probes, CliError> {
        let mut probes = Probes::channels(&self.outputs.channels);
        for ev in &self.outputs.events {
            let i = names
                .iter()
                .position(|n| *n == ev.component)
                .ok_or_else(|| CliError::Config(format!("unknown event component {:?}", ev.component)))?;
            probes = probes.with_event(i, ev.direction);
        }
        Ok(probes)
    }

    pub fn invariants(&self, id: SystemId) -> Result<Vec<InvariantKind>, CliError> {
        let kinds = match &self.outputs.invariants {
            Some(k) => k.clone(),
            None => InvariantKind::defaults_for(id),
        };
        for k in &kinds {
            if k.name_for(id).is_none() {
                return Err(CliError::Config(format!(
                    "invariant {k:?} does not apply to {id}"
                )));
            }
        }
        Ok(kinds)
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, CliError> {
        self.integrator.validate(0.0).map_err(CliError::from_config)?;
        Ok(self.integrator.clone())
    }
}

fn named_state(map: &BTreeMap<String, f64>, names: &[&str]) -> Result<Vec<f64>, CliError> {
    for key in map.keys() {
        if !names.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "unknown state component {key:?}; expected {}",
                names.join(", ")
            )));
        }
    }
    names
        .iter()
        .map(|n| {
            let v = *map
                .get(*n)
                .ok_or_else(|| CliError::Config(format!("missing state component {n:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Config(format!("state component {n} must be finite")))
            }
        })
        .collect()
}
