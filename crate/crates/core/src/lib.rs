//! Exact post-selection inference for generalized lasso problems.
//!
//! The crate solves the signal-approximation generalized lasso through its
//! dual path, represents the selection events of that path (and of an
//! information-criterion stopping rule layered on top) as polyhedra in the
//! observation space, and computes truncated-Gaussian p-values and
//! confidence intervals for linear contrasts conditional on those events.

pub mod contrast;
pub mod error;
pub mod ic;
pub mod linalg;
pub mod path;
pub mod penalty;
pub mod polytope;
pub mod tg;

pub use error::{Error, Result};
pub use penalty::{PenaltyKind, PenaltyMatrix, RegressionTransform};
