//! Monotone resolvent-type time stepping for second-order fully nonlinear
//! evolution equations with a Caputo time-fractional derivative,
//!
//! ```text
//! ∂_t^α u + F(x, t, Du, D²u) = 0,   u(·, 0) = u₀,   0 < α < 1,
//! ```
//!
//! together with the oracles and harness used to check it numerically.
//!
//! The crate is organised bottom-up:
//!
//! - [`special`]: Γ and the one-parameter Mittag-Leffler function.
//! - [`caputo`]: the L1-type weights, the discrete Caputo operator and a
//!   quadrature oracle for the continuous one.
//! - [`operators`]: grids, the nonlinear operator `F` and its monotone
//!   finite-difference discretisation.
//! - [`resolvent`]: the per-level elliptic solve `μ(u − g) + F^h[u] = 0`.
//! - [`stepper`]: the time-stepping scheme with full history.
//! - [`harness`]: presets, convergence studies, the verification suite and
//!   CSV output used by the command-line tool.

pub mod caputo;
pub mod error;
pub mod harness;
pub mod operators;
pub mod resolvent;
pub mod special;
pub mod stepper;

pub use error::{Error, Result};
