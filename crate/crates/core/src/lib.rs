//! Optimal tracking of a frictionless target position under temporary (quadratic) price impact.
//!
//! The optimal holdings trade toward a kernel-weighted average of expected future targets,
//! the *signal*, at speed `tanh(tau)/sqrt(kappa)` (free terminal position) or
//! `coth(tau)/sqrt(kappa)` (terminal position pinned). This crate computes those signals,
//! integrates the resulting strategies, prices the minimal costs in closed form and checks
//! everything against an independent discrete-time linear-quadratic solver.

// Published coefficients are kept verbatim, and `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod bachelier;
pub mod costs;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod model;
pub mod normal;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod strategies;
pub mod targets;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use model::ModelParams;
