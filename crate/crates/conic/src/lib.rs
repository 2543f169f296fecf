//! A small first-order conic solver.
//!
//! Problems are posed in the standard form `min cᵀz s.t. Az + s = b, s ∈ K`
//! where `K` is a product of zero, nonnegative, Lorentz, rotated Lorentz and
//! positive semidefinite cones. The solver targets desk-scale problems (a few
//! hundred variables at most) and stores the constraint matrix densely.

pub mod cone;
pub mod error;
pub mod reference;
mod scaling;
pub mod solver;
pub mod sparse;

pub use cone::{project_psd, project_rsoc, project_soc, smat, svec, svec_index, svec_len, ConeBlock, ConeBlockSpec};
pub use error::{ConicError, Result};
pub use solver::{solve, ConicProblem, DualBlock, SolverResult, SolverSettings, SolverStatus};
pub use sparse::Triplets;
