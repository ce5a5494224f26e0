//! Points, closed convex sets with exact projections, and families of sets.
//!
//! The intersection `C = ⋂ C_i` of a [`SetFamily`] is never materialised;
//! projections onto it and distances to it come from the Dykstra oracle
//! ([`SetFamily::dykstra_project`]), which converges to the true nearest
//! point rather than just some point of `C`.

mod family;
mod set;
mod vector;

use thiserror::Error;

pub use family::{
    FamilyRegularityEstimate, SetFamily, DEFAULT_DYKSTRA_CYCLES, ORACLE_TOL, RATIO_SKIP, TIE_TOL,
    WITNESS_TOL,
};
pub use set::{ConvexSet, Shape};
pub use vector::Vector;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("vector must have at least one coordinate")]
    EmptyVector,
    #[error("coordinate {index} is not finite")]
    NonFiniteCoordinate { index: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("normal vector must have positive norm")]
    DegenerateNormal,
    #[error("ball radius must be finite and nonnegative, got {0}")]
    NegativeRadius(f64),
    #[error("box has lower > upper in coordinate {index}")]
    InvertedBox { index: usize },
    #[error("set family must contain at least one set")]
    EmptyFamily,
    #[error("witness lies at distance {distance:e} from set {set}")]
    WitnessOutside { set: usize, distance: f64 },
    #[error("Dykstra oracle did not converge within {iterations} cycles")]
    NonConvergence { iterations: usize, last: Vector },
    #[error("every one of the {samples} samples was skipped")]
    DegenerateSample { samples: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
