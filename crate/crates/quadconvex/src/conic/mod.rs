//! Embedded small-scale conic solver (PSD x second-order product cones).
//!
//! This backs the lifted semidefinite relaxation; nothing here knows about
//! quadratic maps. See [`solver::solve`] for the algorithm.

mod cone;
mod solver;

pub use cone::{smat, svec, svec_len, ConeSpec};
pub use solver::{solve, ConicError, ConicProblem, Residuals, Solution, SolverOptions};
