//! Simulation and diagnostics for a second-order-primal / first-order-dual
//! dynamical system with time scaling and Tikhonov regularization, applied to
//! separable convex problems
//!
//! ```text
//!     minimize   f(x) + g(y)
//!     subject to A x + B y = b
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`problem`]: problem instances, (augmented) Lagrangians, KKT residuals and
//!   reference solutions (saddle point, minimal-norm solution, Tikhonov path).
//! * [`schedules`]: the time-scaling and Tikhonov curves and the hypothesis
//!   checks that go with them.
//! * [`dynamics`]: right-hand sides of the regularized system and of two
//!   comparison systems.
//! * [`integrator`]: adaptive Dormand–Prince 5(4) with dense output, plus a
//!   fixed-step RK4 used for cross-checks.
//! * [`analysis`]: convergence metrics, Lyapunov energies, integral estimates
//!   and rate certification along trajectories.
//! * [`experiment`]: run specifications, presets, CSV/JSON artifacts and the
//!   command implementations behind the `pdflow` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod charts;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod integrator;
pub mod numfmt;
pub mod problem;
pub mod schedules;

pub use error::{Error, Result};
