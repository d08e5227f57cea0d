//! Metrisability analysis for two-dimensional projective structures.

pub mod expr;
pub mod input_model;
pub mod invariants;
pub mod job;
pub mod jets;
pub mod linalg;
pub mod recovery;
pub mod scalar;
pub mod tractor;

pub use expr::{parse_expr, EvalMode, Expr};
pub use input_model::{LambdaPoly, MetricInput, ProjectiveStructure};
pub use jets::{Axis, Elementary, Jet, JetError, Point};
pub use scalar::{Mode, Scalar};
