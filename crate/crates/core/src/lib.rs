//! Finite-volume solvers for the half-line Keller-Segel equation with a
//! drift issued from the boundary,
//!
//! ```text
//! ∂_t n = ∂_xx n + n(t,0) ∂_x n,   ∂_x n(t,0) + n(t,0)² = 0,
//! ```
//!
//! together with its self-similar rescaling, the coupled reservoir model,
//! the functionals used to analyse them and a scenario runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod coupled;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod profiles;
pub mod gauss_kronrod;
pub mod scenario;
pub mod scheme;
pub mod selfsimilar;

pub use error::{Error, Result};
pub use grid::{make_uniform_grid, quadrature, DensityField, Grid};
pub use kernel::{blowup_time_bound, BlowupCertificate, BlowupReason, SolverState, StepControl};
