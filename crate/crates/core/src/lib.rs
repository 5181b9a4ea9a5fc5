//! Numerical laboratory for incompressible flow with a fading power-law
//! memory kernel `ρ t^{−β} e^{−δt}`.
//!
//! The crate is organized bottom up: special functions and kernel quadrature,
//! the MAC-grid discretization, the transient and steady solvers, and the
//! analysis and experiment layers on top.

// Validation writes `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod discretization;
pub mod error;
pub mod experiment;
pub mod forcing;
pub mod grid;
pub mod kernel;
pub mod ops;
pub mod snapshot;
pub mod special;
pub mod steady;
pub mod transforms;
pub mod transient;

pub use error::{Error, Result};
