//! Relativistic Ermakov-Milne-Pinney (REMP) systems.
//!
//! The crate covers the planar relativistic time-dependent harmonic
//! oscillator and the closed `(x, rho)` system obtained from it, the
//! Ray-Reid coupled oscillators and their relativistic analogue, the
//! first integrals of all of these, pseudo-potential analysis of the
//! autonomous cases, and the nonlinear superposition law.
//!
//! Everything is numerical: systems are integrated with an adaptive
//! Dormand-Prince pair and conservation laws are measured as drift.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// a failed run carries its partial trajectory
#![allow(clippy::result_large_err)]

pub mod cli;
pub mod conservative;
pub mod elliptic;
mod error;
pub mod exprparse;
pub mod integrator;
pub mod invariants;
pub mod kinematics;
pub mod quadrature;
pub mod rescale;
pub mod roots;
pub mod superposition;
pub mod systems;

pub use error::{Error, Result};
