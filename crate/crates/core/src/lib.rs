//! Toolkit for discrete-time two-time-scale systems of the form
//!
//! ```text
//! x[n+1] = x[n] + f(mu z[n])
//! z[n+1] = g(x[n], z[n], mu z[n])
//! ```
//!
//! It solves the slow manifold `z = h(x)`, simulates the full, reduced and
//! boundary-layer models, measures how approximation errors scale with
//! `mu`, and builds quadratic Lyapunov certificates for the reduced and
//! boundary-layer models. All norms are Euclidean.
//!
//! ```
//! use chi_spt::model::builtin::lin1;
//! use chi_spt::manifold::{solve_h, ManifoldSolverConfig};
//!
//! let sys = lin1();
//! let h = solve_h(&sys, &[2.0], &ManifoldSolverConfig::default()).unwrap();
//! assert!((h[0] - 1.0).abs() < 1e-12);
//! ```

pub mod analysis;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod lyapunov;
pub mod manifold;
pub mod model;
pub mod report;
pub mod simulate;

pub use error::{ChiError, Result};
pub use model::{parse_system_config, ChiSystem};
pub use simulate::Trajectory;
