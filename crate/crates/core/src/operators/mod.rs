//! Operator expressions over the geometry layer and their SQNE certificates.
//!
//! An [`OperatorExpr`] is a tree whose leaves are projections, subgradient
//! projections and the furthest-set projection, and whose inner nodes are
//! relaxations, convex combinations and products. Every tree carries a
//! structural strong quasi-nonexpansiveness constant ([`SqneCertificate`])
//! and an explicit superset description of its fixed-point set.

mod certificate;
mod expr;
mod function;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use certificate::{FixedPointSet, SqneCertificate};
pub use expr::{OperatorExpr, WEIGHT_SUM_TOL};
pub use function::{AffinePiece, ConvexFunction, FunctionKind, ACTIVE_TOL, ZERO_SUBGRADIENT};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("relaxation parameter {lambda} outside (0, 2]")]
    InvalidRelaxation { lambda: f64 },
    #[error("relaxation parameter {lambda} > 1 needs a cutter child")]
    RelaxationRequiresCutter { lambda: f64 },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("{0} needs at least one child")]
    NoChildren(&'static str),
    #[error("invalid function: {0}")]
    InvalidFunction(String),
    #[error("feasible point has f = {value:e} > 0")]
    InfeasibleFunction { value: f64 },
    #[error("zero subgradient at a point with f = {value:e} > 0")]
    InconsistentFunction { value: f64 },
    #[error("no SQNE certificate: child {child} {reason}")]
    CertificateUnavailable { child: usize, reason: String },
    #[error("fixed-point identity not guaranteed: {0}")]
    IdentityNotGuaranteed(String),
    #[error("fixed-point set is the whole space")]
    WholeSpace,
}
