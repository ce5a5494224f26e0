use serde::Serialize;

use crate::regularity::{CheckKind, RegularityReport, Tally};

use super::{IterationTrace, SolverError};

/// Distances below this end the window used by [`fit_empirical_rate`].
pub const FIT_FLOOR: f64 = 1e-14;
const MIN_FIT_POINTS: usize = 5;
const REFERENCE_TOL: f64 = 1e-12;

/// Envelope `||x^k - x*|| <= c q^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBound {
    pub c: f64,
    pub q: f64,
    pub s: usize,
}

impl RateBound {
    /// `q = 0` is allowed here (one-shot convergence).
    pub fn new(c: f64, q: f64) -> Result<Self, SolverError> {
        if !(c > 0.0 && c.is_finite()) || !(0.0..1.0).contains(&q) {
            return Err(SolverError::InvalidArgument(format!(
                "rate bound needs c > 0 and q in [0, 1), got c = {c}, q = {q}"
            )));
        }
        Ok(Self { c, q, s: 1 })
    }

    pub fn at(&self, k: usize) -> f64 {
        self.c * self.q.powi(k as i32)
    }
}

/// `q = sqrt(1 - ρ/δ²)`.
pub fn theoretical_rate(rho: f64, delta: f64) -> Result<f64, SolverError> {
    if !(rho > 0.0 && delta > 0.0) || !rho.is_finite() || !delta.is_finite() {
        return Err(SolverError::InvalidArgument(format!(
            "need rho > 0 and delta > 0, got rho = {rho}, delta = {delta}"
        )));
    }
    let ratio = rho / (delta * delta);
    if ratio > 1.0 {
        return Err(SolverError::InconsistentParameters { rho, delta });
    }
    Ok((1.0 - ratio).sqrt())
}

/// Spread a bound on every `s`-th iterate over all iterates:
/// `c' = c / q^((s-1)/s)`, `q' = q^(1/s)`.
pub fn rate_rescale(c: f64, q: f64, s: usize) -> Result<RateBound, SolverError> {
    if !(c > 0.0 && c.is_finite()) || !(q > 0.0 && q < 1.0) || s == 0 {
        return Err(SolverError::InvalidArgument(format!(
            "rate_rescale needs c > 0, q in (0, 1), s >= 1; got c = {c}, q = {q}, s = {s}"
        )));
    }
    if s == 1 {
        return Ok(RateBound { c, q, s });
    }
    let root = q.powf(1.0 / s as f64);
    Ok(RateBound {
        c: c / root.powi(s as i32 - 1),
        q: root,
        s,
    })
}

/// `dist_xstar_k <= c q^k + tol` on every recorded row.
pub fn check_rate_bound(
    trace: &IterationTrace,
    xstar: &crate::geometry::Vector,
    bound: &RateBound,
    tol: f64,
) -> Result<RegularityReport, SolverError> {
    let recorded = trace.xstar.as_ref().ok_or(SolverError::MissingChannel("dist_xstar"))?;
    let distance = recorded.distance(xstar);
    if !(distance <= REFERENCE_TOL) {
        return Err(SolverError::MismatchedReference { distance });
    }
    let mut tally = Tally::new(CheckKind::RateBound, tol, None);
    for row in &trace.rows {
        let d = row.dist_xstar.ok_or(SolverError::MissingChannel("dist_xstar"))?;
        tally.observe(d - bound.at(row.k), Tally::at_step(row.k));
    }
    Ok(tally.finish())
}

/// `exp(slope)` of a least-squares line through `ln d_k` for `k >=
/// burn_in`, with `d` the x* channel if present and otherwise the distance
/// to `C`. The default burn-in is 10% of the trace.
pub fn fit_empirical_rate(trace: &IterationTrace, burn_in: Option<usize>) -> Result<f64, SolverError> {
    let series: Vec<(usize, f64)> = if trace.rows.iter().all(|r| r.dist_xstar.is_some()) && !trace.is_empty() {
        trace.rows.iter().map(|r| (r.k, r.dist_xstar.expect("checked"))).collect()
    } else if trace.rows.iter().all(|r| r.dist_c.is_some()) && !trace.is_empty() {
        trace.rows.iter().map(|r| (r.k, r.dist_c.expect("checked"))).collect()
    } else if trace.is_empty() {
        return Err(SolverError::InsufficientPoints { available: 0 });
    } else {
        return Err(SolverError::MissingChannel("dist_xstar or dist_C"));
    };
    let burn_in = burn_in.unwrap_or(series.len() / 10);
    let window = &series[burn_in.min(series.len())..];
    let cut = window.iter().position(|&(_, d)| !(d >= FIT_FLOOR));
    let points = &window[..cut.unwrap_or(window.len())];
    if points.len() < MIN_FIT_POINTS {
        return Err(match cut {
            Some(i) => SolverError::ExactTermination {
                step: window[i].0,
                available: points.len(),
            },
            _ => SolverError::InsufficientPoints {
                available: points.len(),
            },
        });
    }
    let n = points.len() as f64;
    let mean_k = points.iter().map(|&(k, _)| k as f64).sum::<f64>() / n;
    let mean_y = points.iter().map(|&(_, d)| d.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(k, d) in points {
        let dk = k as f64 - mean_k;
        sxy += dk * (d.ln() - mean_y);
        sxx += dk * dk;
    }
    Ok((sxy / sxx).exp())
}
