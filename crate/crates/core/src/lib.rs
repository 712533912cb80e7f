//! First-order methods on strongly convex problems, with the tooling to
//! certify their linear convergence.
//!
//! The crate provides gradient descent, Nesterov-1983 (in its two-sequence
//! and phase-space forms) and FISTA, plus:
//!
//! - [`lyapunov`]: the discrete Lyapunov energy, the threshold `K`, the
//!   linear-rate bounds, and numerical checks of the inequalities behind them;
//! - [`spectral`]: per-mode iteration matrices on quadratics and their
//!   eigenvalues;
//! - [`ode`]: the gradient-correction high-resolution ODE with its
//!   continuous Lyapunov function;
//! - [`analysis`]: log-linear rate fits;
//! - [`cli`]: a config-driven experiment runner that writes CSV traces and
//!   a JSON verdict report.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

// `!(x > 0.0)` style guards reject NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod lyapunov;
pub mod ode;
pub mod optimizers;
pub mod problems;
pub mod spectral;

pub use error::{Error, Result};
