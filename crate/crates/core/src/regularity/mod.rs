//! Sampled regularity checks and the closed-form modulus compositions.
//!
//! Sampled quantities are one-sided: [`estimate_linear_modulus`] can only
//! find ratios that are attained, so it bounds the minimal modulus from
//! below, while the `composed_modulus_*` formulas bound it from above.

mod checks;
mod report;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{GeometryError, SetFamily, Vector, ORACLE_TOL, RATIO_SKIP};
use crate::operators::OperatorError;
use crate::sampling::BallSampler;
use crate::schedules::{Schedule, ScheduleError};

pub use checks::{
    check_aggregate, check_cutter, check_cutter_distance, check_fejer, check_sqne,
    check_subgradient_regularity, check_trace_regularity, fixed_points_for, TRACE_RESIDUAL_FLOOR,
};
pub use report::{CheckKind, RegularityReport, Witness};
pub(crate) use report::Tally;

#[derive(Debug, Error)]
pub enum RegularityError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("claimed fixed point {index} has residual {residual:e}")]
    BadWitness { index: usize, residual: f64 },
    #[error("every one of the {pairs} sample pairs was skipped")]
    DegenerateSample { pairs: usize },
    #[error("trace has no {0} channel")]
    MissingChannel(&'static str),
}

/// Largest sampled `d(x, C) / ||U_k x - x||`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusEstimate {
    pub delta_hat: f64,
    pub region_center: Vector,
    pub region_radius: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub skipped: usize,
}

fn positive(name: &str, v: f64) -> Result<(), RegularityError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(RegularityError::InvalidArgument(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Sample `n` points of `B(center, radius)` and maximise
/// `d(x, C) / ||U_k x - x||` over them and `k < k_range`. Pairs with
/// residual below `1e-9` are skipped.
pub fn estimate_linear_modulus(
    sched: &Schedule,
    target: &SetFamily,
    center: &Vector,
    radius: f64,
    n: usize,
    k_range: usize,
    seed: u64,
) -> Result<ModulusEstimate, RegularityError> {
    positive("radius", radius)?;
    if n == 0 || k_range == 0 {
        return Err(RegularityError::InvalidArgument("n and k_range must be >= 1".into()));
    }
    if center.dim() != target.dim() || target.dim() != sched.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: target.dim(),
            found: center.dim(),
        }
        .into());
    }
    let mut best: Option<f64> = None;
    let mut skipped = 0;
    for x in BallSampler::new(center.clone(), radius, seed).take(n) {
        let mut d = None;
        for k in 0..k_range {
            let r = sched.apply_at(k, &x)?.distance(&x);
            if r < RATIO_SKIP {
                skipped += 1;
                continue;
            }
            let d = match d {
                Some(d) => d,
                None => *d.insert(target.distance_intersection(&x, ORACLE_TOL)?),
            };
            let ratio = d / r;
            best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
        }
    }
    let delta_hat = best.ok_or(RegularityError::DegenerateSample { pairs: n * k_range })?;
    Ok(ModulusEstimate {
        delta_hat,
        region_center: center.clone(),
        region_radius: radius,
        sample_count: n,
        seed,
        skipped,
    })
}

/// `2 κ² δ² / σ`.
pub fn composed_modulus_combination(kappa: f64, delta: f64, sigma: f64) -> Result<f64, RegularityError> {
    positive("kappa", kappa)?;
    positive("delta", delta)?;
    positive("sigma", sigma)?;
    Ok(2.0 * kappa * kappa * delta * delta / sigma)
}

/// `2 p κ² δ² / ρ`, for factor moduli `δ >= 1`.
pub fn composed_modulus_product(kappa: f64, delta: f64, rho: f64, p: usize) -> Result<f64, RegularityError> {
    positive("kappa", kappa)?;
    positive("rho", rho)?;
    if !(delta >= 1.0 && delta.is_finite()) {
        return Err(RegularityError::InvalidArgument(format!("delta must be >= 1, got {delta}")));
    }
    if p == 0 {
        return Err(RegularityError::InvalidArgument("p must be >= 1".into()));
    }
    Ok(2.0 * p as f64 * kappa * kappa * delta * delta / rho)
}

/// `δ / λ` for relaxations with `λ ∈ (0, 1]`.
pub fn relaxed_modulus(delta: f64, lambda_inf: f64) -> Result<f64, RegularityError> {
    positive("delta", delta)?;
    if !(lambda_inf > 0.0 && lambda_inf <= 1.0) {
        return Err(RegularityError::InvalidArgument(format!(
            "lambda_inf must lie in (0, 1], got {lambda_inf}"
        )));
    }
    Ok(delta / lambda_inf)
}
