use thiserror::Error;

use crate::exprparse::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("superluminal state: (v/c)^2 = {beta_sq} exceeds the guard band")]
    Superluminal { beta_sq: f64 },

    #[error("radial coordinate must be positive, got rho = {rho}")]
    NonPositiveRho { rho: f64 },

    #[error("coordinate-axis singularity at x = {x}, y = {y}")]
    AxisSingularity { x: f64, y: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside the domain of {func}: {value}")]
    Domain { func: &'static str, value: f64 },

    #[error("elliptic modulus must lie in [0, 1], got k = {k}")]
    ModulusOutOfRange { k: f64 },

    #[error("F(phi, 1) diverges for |phi| >= pi/2 (phi = {phi})")]
    DivergentElliptic { phi: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({max_steps}) exceeded at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },

    #[error("integration failed at t = {t}: {source}")]
    Integration { t: f64, source: Box<Error> },

    #[error("channel {0} is not available for this system or trajectory")]
    MissingChannel(&'static str),

    #[error("invariant {invariant} does not apply to system {system}")]
    InapplicableInvariant { invariant: String, system: String },

    #[error("trajectory needs at least 2 samples, got {0}")]
    InsufficientSamples(usize),

    #[error("no oscillation: J^2 = {j_sq} is not below the periodicity bound {bound}")]
    NoOscillation { j_sq: f64, bound: f64 },

    #[error("root bracketing failed: {0}")]
    RootBracket(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("initial data inconsistent with the chosen phase (mismatch {mismatch:e})")]
    InconsistentInitialData { mismatch: f64 },

    #[error("angular momentum must be positive, got J = {j}")]
    NonPositiveJ { j: f64 },
}
