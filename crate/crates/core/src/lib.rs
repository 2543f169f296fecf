//! Convex relaxations of optimization problems with a bilinear matrix
//! inequality constraint,
//!
//! ```text
//!     minimize cᵀx   subject to   F₀ + Σₖ xₖKₖ + Σᵢⱼ xᵢxⱼLᵢⱼ ⪯ 0,
//! ```
//!
//! together with a penalized variant that recovers feasible points, and
//! certificates that check a computed solution against optimality and
//! recovery conditions.

pub mod cones;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod pencil;
pub mod relaxation;
pub mod sequential;

pub use cones::ConeKind;
pub use error::{BmiError, Result};
pub use pencil::{BmiProblem, GMfcq, LiftedPoint, MatrixPencil, Mfcq, NormKind, NormOrder, PencilNormEstimate};
