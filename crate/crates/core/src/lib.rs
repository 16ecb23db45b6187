//! Direct estimation of the difference between two Gaussian precision
//! matrices by minimizing a lasso-penalized D-trace loss.
//!
//! The estimator never inverts either sample covariance. [`solver::DtraceAdmm`]
//! runs a three-block ADMM whose two quadratic sub-problems reduce to
//! Sylvester equations solved in closed form from eigendecompositions
//! computed once per covariance pair.
//!
//! ```
//! use difftrace::covariance::CovariancePair;
//! use difftrace::linalg::SymMatrix;
//! use difftrace::solver::{admm_solve, SolverConfig};
//!
//! let sx = SymMatrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
//! let sy = SymMatrix::identity(2);
//! let pair = CovariancePair::new(sx, sy, 100, 100).unwrap();
//! let (est, _) = admm_solve(&pair, 0.05, &SolverConfig::default(), None).unwrap();
//! assert!(est.converged);
//! ```

pub mod benchmark;
pub mod cli;
pub mod covariance;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod linalg;
pub mod model_selection;
pub mod simulation;
pub mod solver;

pub use error::{Error, Result};
