//! The feasibility iteration `x^{k+1} = U_k x^k` with per-step diagnostics,
//! plus rate bounds and empirical rate fitting on the recorded traces.

mod rates;
mod trace;

use thiserror::Error;

use crate::geometry::{GeometryError, SetFamily, Vector, ORACLE_TOL};
use crate::operators::OperatorError;
use crate::schedules::{Schedule, ScheduleError};

pub use rates::{check_rate_bound, fit_empirical_rate, rate_rescale, theoretical_rate, RateBound, FIT_FLOOR};
pub use trace::{IterationTrace, StopReason, TraceRow};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("schedule has rho_inf = {0}; need > 0")]
    NotStronglyQne(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("trace has no {0} channel")]
    MissingChannel(&'static str),
    #[error("need at least 5 points for a rate fit, have {available}")]
    InsufficientPoints { available: usize },
    #[error("distance fell below the fit floor at step {step}, leaving {available} points")]
    ExactTermination { step: usize, available: usize },
    #[error("rho = {rho} exceeds delta^2 = {}", delta * delta)]
    InconsistentParameters { rho: f64, delta: f64 },
    #[error("reference point differs from the trace's x* by {distance:e}")]
    MismatchedReference { distance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopRule {
    pub residual_tol: f64,
    pub dist_tol: Option<f64>,
    pub max_iter: usize,
}

impl StopRule {
    pub fn new(residual_tol: f64, max_iter: usize) -> Self {
        Self {
            residual_tol,
            dist_tol: None,
            max_iter,
        }
    }
}

/// Optional per-step measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Channels {
    /// Record `d(x^k, C)` through the Dykstra oracle on the schedule target.
    pub dist_c: bool,
    pub xstar: Option<Vector>,
    /// Points of `C` for the Fejér slack.
    pub witnesses: Vec<Vector>,
    /// Keep `x^k` every this many steps; 0 keeps none.
    pub store_every: usize,
}

impl Default for Channels {
    fn default() -> Self {
        Self {
            dist_c: false,
            xstar: None,
            witnesses: Vec::new(),
            store_every: 1,
        }
    }
}

/// `n` Dykstra projections of seeded samples from `B(center, radius)` onto
/// the target, for use as Fejér witnesses.
pub fn sample_witnesses(
    target: &SetFamily,
    n: usize,
    center: &Vector,
    radius: f64,
    seed: u64,
) -> Result<Vec<Vector>, SolverError> {
    Ok(target.sample_members(n, center, radius, seed, ORACLE_TOL)?)
}

/// Run `x^{k+1} = U_k x^k` from `x0`.
///
/// Row `k` describes `x^k`. The run stops at the first `k` for which `x^k`
/// moves by at most `residual_tol` under each of `U_k, ..., U_{k+s-1}`
/// (`s` the growth bound, 1 when absent) and, if requested, `d(x^k, C) <=
/// dist_tol`. Running out of budget is reported in the trace, not as an
/// error.
pub fn solve_cfp(
    sched: &Schedule,
    x0: &Vector,
    stop: &StopRule,
    channels: &Channels,
) -> Result<IterationTrace, SolverError> {
    let rho = sched.rho_inf();
    if !(rho > 0.0) {
        return Err(SolverError::NotStronglyQne(rho));
    }
    if x0.dim() != sched.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: sched.dim(),
            found: x0.dim(),
        }
        .into());
    }
    if !(stop.residual_tol >= 0.0) {
        return Err(SolverError::InvalidArgument("residual_tol must be >= 0".into()));
    }
    if stop.dist_tol.is_some() && !channels.dist_c {
        return Err(SolverError::MissingChannel("dist_C (needed by dist_tol)"));
    }
    for w in channels.witnesses.iter().chain(channels.xstar.iter()) {
        if w.dim() != x0.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: x0.dim(),
                found: w.dim(),
            }
            .into());
        }
    }
    let window = sched.growth_bound().unwrap_or(1);
    let target = sched.target();
    let mut rows = Vec::new();
    let mut iterates = Vec::new();
    let mut x = x0.clone();
    let mut stop_reason = StopReason::BudgetExhausted;
    let mut steps = 0;
    for k in 0..stop.max_iter {
        let y = sched.apply_at(k, &x)?;
        let residual = y.distance(&x);
        let dist_c = if channels.dist_c {
            Some(target.distance_intersection(&x, ORACLE_TOL)?)
        } else {
            None
        };
        let row = TraceRow {
            k,
            residual,
            dist_c,
            dist_xstar: channels.xstar.as_ref().map(|s| x.distance(s)),
            fejer_slack: fejer_slack(&channels.witnesses, &x, &y),
            lambda: None,
        };
        rows.push(row);
        if channels.store_every > 0 && k % channels.store_every == 0 {
            iterates.push((k, x.clone()));
        }
        if converged(sched, k, &x, residual, window, stop.residual_tol)?
            && stop.dist_tol.is_none_or(|t| dist_c.is_some_and(|d| d <= t))
        {
            stop_reason = StopReason::Converged;
            break;
        }
        x = y;
        steps = k + 1;
    }
    log::debug!(
        "solve_cfp: {} after {steps} steps, {} rows",
        match stop_reason {
            StopReason::Converged => "converged",
            StopReason::BudgetExhausted => "budget exhausted",
        },
        rows.len()
    );
    Ok(IterationTrace {
        rows,
        iterates,
        final_iterate: x,
        stop_reason,
        total_steps: steps,
        xstar: channels.xstar.clone(),
        step_channel: false,
    })
}

pub(crate) fn fejer_slack(witnesses: &[Vector], x: &Vector, y: &Vector) -> Option<f64> {
    witnesses
        .iter()
        .map(|z| y.distance(z) - x.distance(z))
        .fold(None, |acc, s| Some(acc.map_or(s, |a: f64| a.max(s))))
}

fn converged(
    sched: &Schedule,
    k: usize,
    x: &Vector,
    residual: f64,
    window: usize,
    tol: f64,
) -> Result<bool, SolverError> {
    if residual > tol {
        return Ok(false);
    }
    for j in 1..window {
        if sched.apply_at(k + j, x)?.distance(x) > tol {
            return Ok(false);
        }
    }
    Ok(true)
}
