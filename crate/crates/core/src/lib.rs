//! Strongly quasi-nonexpansive operators, linear regularity, and the
//! iterative methods built on them: convex feasibility by fixed-point
//! iteration and variational inequalities over the solution set.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod instances;
pub mod regularity;
pub mod operators;
pub mod problem;
pub mod runner;
pub mod sampling;
pub mod schedules;
pub mod solver;
pub mod vi;

pub use geometry::{ConvexSet, GeometryError, SetFamily, Shape, Vector};
pub use operators::{ConvexFunction, OperatorError, OperatorExpr, SqneCertificate};
pub use problem::{ProblemSpec, SpecError};
pub use runner::{run_solve, run_verify, run_vi, RunError};
