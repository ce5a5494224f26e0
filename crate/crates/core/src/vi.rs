//! Hybrid steepest descent `u^{k+1} = U_k u^k - λ_k G(U_k u^k)` for the
//! variational inequality `⟨G ū, u - ū⟩ >= 0` on `C = ⋂ C_i`.
//!
//! `G` is a translation `u - b` or an affine map `M u + c`; for these the
//! strong-monotonicity constant `η` (smallest eigenvalue of the symmetric
//! part of `M`) and the Lipschitz constant `κ_G` (largest singular value)
//! are computed exactly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, SetFamily, Vector, DEFAULT_DYKSTRA_CYCLES, ORACLE_TOL};
use crate::operators::OperatorError;
use crate::sampling::BallSampler;
use crate::schedules::Schedule;
use crate::solver::{fejer_slack, Channels, IterationTrace, StopReason, TraceRow};

/// Projected-gradient iterations allowed in [`vi_ground_truth`].
pub const GROUND_TRUTH_BUDGET: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ViError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("G is not strongly monotone (eta = {eta:e})")]
    NotStronglyMonotone { eta: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("schedule has no growth bound; the control condition cannot be checked")]
    MissingGrowthBound,
    #[error("constraint set {index} is not enforced by the schedule")]
    UncoveredConstraint { index: usize },
    #[error("schedule has rho_inf = {0}; need > 0")]
    NotStronglyQne(f64),
    #[error("x* stopping needs the x* channel")]
    MissingReference,
    #[error("ground truth did not settle within {iterations} iterations (last displacement {displacement:e})")]
    NonConvergence { iterations: usize, displacement: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum GMap {
    /// `G(u) = u - b`.
    Translation { b: Vector },
    /// `G(u) = M u + c`, `M` stored row-major.
    Affine { m: DMatrix<f64>, c: Vector },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VIProblem {
    g: GMap,
    eta: f64,
    kappa_g: f64,
    constraint: SetFamily,
}

impl VIProblem {
    pub fn translation(b: Vector, constraint: SetFamily) -> Result<Self, ViError> {
        check_dim(constraint.dim(), b.dim())?;
        Ok(Self {
            g: GMap::Translation { b },
            eta: 1.0,
            kappa_g: 1.0,
            constraint,
        })
    }

    /// `rows` is the matrix `M` row by row.
    pub fn affine(rows: &[Vec<f64>], c: Vector, constraint: SetFamily) -> Result<Self, ViError> {
        let n = c.dim();
        check_dim(constraint.dim(), n)?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(ViError::InvalidArgument(format!("M must be {n} x {n}")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ViError::InvalidArgument("M has non-finite entries".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let m = DMatrix::from_row_slice(n, n, &flat);
        let sym = (&m + m.transpose()) * 0.5;
        let eta = sym.symmetric_eigen().eigenvalues.min();
        if !(eta > 0.0) {
            return Err(ViError::NotStronglyMonotone { eta });
        }
        let kappa_g = m.singular_values().max();
        Ok(Self {
            g: GMap::Affine { m, c },
            eta,
            kappa_g,
            constraint,
        })
    }

    pub fn g(&self) -> &GMap {
        &self.g
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn kappa_g(&self) -> f64 {
        self.kappa_g
    }

    pub fn constraint(&self) -> &SetFamily {
        &self.constraint
    }

    pub fn dim(&self) -> usize {
        self.constraint.dim()
    }

    pub fn eval(&self, u: &Vector) -> Vector {
        match &self.g {
            GMap::Translation { b } => u - b,
            GMap::Affine { m, c } => {
                let mu = m * nalgebra::DVector::from_column_slice(u.as_slice());
                Vector::new(mu.iter().zip(c.iter()).map(|(a, b)| a + b).collect())
                    .expect("finite affine image")
            }
        }
    }

    /// Worst sampled violations of `⟨Gx - Gy, x - y⟩ >= η||x - y||²` and
    /// `||Gx - Gy|| <= κ_G ||x - y||` over `n` seeded pairs.
    pub fn constant_violations(&self, n: usize, center: &Vector, radius: f64, seed: u64) -> (f64, f64) {
        let xs = BallSampler::new(center.clone(), radius, seed);
        let ys = BallSampler::new(center.clone(), radius, seed.wrapping_add(1));
        let (mut mono, mut lip) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y) in xs.zip(ys).take(n) {
            let dg = &self.eval(&x) - &self.eval(&y);
            let dx = &x - &y;
            mono = mono.max(self.eta * dx.norm_sq() - dg.dot(&dx));
            lip = lip.max(dg.norm() - self.kappa_g * dx.norm());
        }
        (mono, lip)
    }
}

fn check_dim(expected: usize, found: usize) -> Result<(), ViError> {
    if expected != found {
        return Err(GeometryError::DimensionMismatch { expected, found }.into());
    }
    Ok(())
}

/// `λ_k`, vanishing and non-summable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSequence {
    /// `λ0 / (k + 1)`.
    Harmonic { lambda0: f64 },
    /// `λ0 / (k + 1)^p`, `p ∈ (0, 1]`.
    Power { lambda0: f64, p: f64 },
}

impl StepSequence {
    pub fn harmonic(lambda0: f64) -> Result<Self, ViError> {
        let s = Self::Harmonic { lambda0 };
        s.validate()?;
        Ok(s)
    }

    pub fn power(lambda0: f64, p: f64) -> Result<Self, ViError> {
        let s = Self::Power { lambda0, p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ViError> {
        let (lambda0, p) = match *self {
            Self::Harmonic { lambda0 } => (lambda0, 1.0),
            Self::Power { lambda0, p } => (lambda0, p),
        };
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(ViError::InvalidArgument(format!("lambda0 must be positive, got {lambda0}")));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(ViError::InvalidArgument(format!("power p must lie in (0, 1], got {p}")));
        }
        Ok(())
    }
}

pub fn step_at(steps: &StepSequence, k: usize) -> f64 {
    match *steps {
        StepSequence::Harmonic { lambda0 } => lambda0 / (k as f64 + 1.0),
        StepSequence::Power { lambda0, p } => lambda0 / (k as f64 + 1.0).powf(p),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViStop {
    /// Stop once `||u^k - x*|| <= xstar_tol`; needs the x* channel.
    pub xstar_tol: Option<f64>,
    pub max_iter: usize,
}

/// Run the hybrid steepest-descent recursion.
///
/// Row `k` describes `u^k`: the residual and Fejér slack refer to the
/// projection half-step `u^k ↦ U_k u^k`, and the distance channels to
/// `u^k` itself. The schedule must carry a growth bound and enforce every
/// constraint set.
pub fn solve_vi(
    problem: &VIProblem,
    sched: &Schedule,
    steps: &StepSequence,
    u0: &Vector,
    stop: &ViStop,
    channels: &Channels,
) -> Result<IterationTrace, ViError> {
    steps.validate()?;
    check_control(problem, sched)?;
    hybrid_descent(problem, sched, |k| step_at(steps, k), u0, stop, channels)
}

fn check_control(problem: &VIProblem, sched: &Schedule) -> Result<(), ViError> {
    if !(sched.rho_inf() > 0.0) {
        return Err(ViError::NotStronglyQne(sched.rho_inf()));
    }
    if sched.growth_bound().is_none() {
        return Err(ViError::MissingGrowthBound);
    }
    check_dim(problem.dim(), sched.dim())?;
    let target = sched.target().sets();
    if let Some(index) = problem
        .constraint
        .sets()
        .iter()
        .position(|c| !target.contains(c))
    {
        return Err(ViError::UncoveredConstraint { index });
    }
    Ok(())
}

pub(crate) fn hybrid_descent(
    problem: &VIProblem,
    sched: &Schedule,
    lambda: impl Fn(usize) -> f64,
    u0: &Vector,
    stop: &ViStop,
    channels: &Channels,
) -> Result<IterationTrace, ViError> {
    check_dim(problem.dim(), u0.dim())?;
    if stop.xstar_tol.is_some() && channels.xstar.is_none() {
        return Err(ViError::MissingReference);
    }
    let mut rows = Vec::new();
    let mut iterates = Vec::new();
    let mut u = u0.clone();
    let mut stop_reason = StopReason::BudgetExhausted;
    let mut steps = 0;
    for k in 0..stop.max_iter {
        let v = sched.apply_at(k, &u)?;
        let lambda_k = lambda(k);
        let dist_xstar = channels.xstar.as_ref().map(|s| u.distance(s));
        rows.push(TraceRow {
            k,
            residual: v.distance(&u),
            dist_c: if channels.dist_c {
                Some(problem.constraint.distance_intersection(&u, ORACLE_TOL)?)
            } else {
                None
            },
            dist_xstar,
            fejer_slack: fejer_slack(&channels.witnesses, &u, &v),
            lambda: Some(lambda_k),
        });
        if channels.store_every > 0 && k % channels.store_every == 0 {
            iterates.push((k, u.clone()));
        }
        if let (Some(tol), Some(d)) = (stop.xstar_tol, dist_xstar) {
            if d <= tol {
                stop_reason = StopReason::Converged;
                break;
            }
        }
        u = if lambda_k == 0.0 {
            v
        } else {
            v.axpy(-lambda_k, &problem.eval(&v))
        };
        steps = k + 1;
    }
    Ok(IterationTrace {
        rows,
        iterates,
        final_iterate: u,
        stop_reason,
        total_steps: steps,
        xstar: channels.xstar.clone(),
        step_channel: true,
    })
}

/// Projected gradient `u ← P_C(u - τ G u)`, `τ = η / κ_G²`, from the
/// family witness (or the origin) until the displacement is at most `tol`.
pub fn vi_ground_truth(problem: &VIProblem, tol: f64) -> Result<Vector, ViError> {
    if !(tol > 0.0) {
        return Err(ViError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let tau = problem.eta / (problem.kappa_g * problem.kappa_g);
    let oracle_tol = (tol * 1e-2).max(ORACLE_TOL);
    let c = &problem.constraint;
    let mut u = c.witness().cloned().unwrap_or_else(|| Vector::zeros(c.dim()));
    let mut displacement = f64::INFINITY;
    for _ in 0..GROUND_TRUTH_BUDGET {
        let next = c.dykstra_project(&u.axpy(-tau, &problem.eval(&u)), oracle_tol, DEFAULT_DYKSTRA_CYCLES)?;
        displacement = next.distance(&u);
        u = next;
        if displacement <= tol {
            return Ok(u);
        }
    }
    Err(ViError::NonConvergence {
        iterations: GROUND_TRUTH_BUDGET,
        displacement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexSet;
    use crate::operators::OperatorExpr;
    use crate::solver::{solve_cfp, StopRule};

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c).unwrap()
    }

    fn orthant() -> SetFamily {
        SetFamily::new(
            vec![
                ConvexSet::half_space(v(&[1.0, 0.0]), 0.0).unwrap(),
                ConvexSet::half_space(v(&[0.0, 1.0]), 0.0).unwrap(),
            ],
            Some(v(&[0.0, 0.0])),
        )
        .unwrap()
    }

    fn cyclic(family: &SetFamily) -> Schedule {
        Schedule::cyclic(family.sets().iter().cloned().map(OperatorExpr::projection).collect()).unwrap()
    }

    #[test]
    fn steps() {
        let h = StepSequence::harmonic(1.0).unwrap();
        assert_eq!(step_at(&h, 0), 1.0);
        assert_eq!(step_at(&h, 9), 0.1);
        assert_eq!(step_at(&StepSequence::power(2.0, 0.5).unwrap(), 3), 1.0);
        assert!(StepSequence::power(1.0, 1.5).is_err());
        assert!(StepSequence::harmonic(0.0).is_err());
    }

    #[test]
    fn ground_truth_examples() {
        let p = VIProblem::translation(v(&[-1.0, -2.0]), orthant()).unwrap();
        assert_eq!(vi_ground_truth(&p, 1e-10).unwrap(), v(&[-1.0, -2.0]));
        let p = VIProblem::translation(v(&[1.0, -1.0]), orthant()).unwrap();
        assert_eq!(vi_ground_truth(&p, 1e-10).unwrap(), v(&[0.0, -1.0]));
        let p = VIProblem::affine(&[vec![2.0, 0.0], vec![0.0, 2.0]], v(&[0.0, 0.0]), orthant()).unwrap();
        assert_eq!((p.eta(), p.kappa_g()), (2.0, 2.0));
        assert!(vi_ground_truth(&p, 1e-10).unwrap().norm() <= 1e-10);
    }

    #[test]
    fn affine_constants() {
        let p = VIProblem::affine(&[vec![2.0, 1.0], vec![-1.0, 3.0]], v(&[0.5, 0.0]), orthant()).unwrap();
        let (mono, lip) = p.constant_violations(1000, &v(&[0.0, 0.0]), 5.0, 3);
        assert!(mono <= 1e-9 && lip <= 1e-9, "{mono} {lip}");
        assert!(p.eta() <= p.kappa_g());
        assert!(matches!(
            VIProblem::affine(&[vec![0.0, 1.0], vec![-1.0, 0.0]], v(&[0.0, 0.0]), orthant()),
            Err(ViError::NotStronglyMonotone { .. })
        ));
    }

    #[test]
    fn translation_inside_converges_to_b() {
        let b = v(&[-1.0, -0.5]);
        let p = VIProblem::translation(b.clone(), orthant()).unwrap();
        let channels = Channels {
            xstar: Some(b.clone()),
            ..Channels::default()
        };
        let stop = ViStop {
            xstar_tol: Some(1e-6),
            max_iter: 10_000,
        };
        let t = solve_vi(&p, &cyclic(&orthant()), &StepSequence::harmonic(1.0).unwrap(), &v(&[3.0, 3.0]), &stop, &channels)
            .unwrap();
        assert_eq!(t.stop_reason, StopReason::Converged);
    }

    #[test]
    fn zero_steps_reduce_to_feasibility_iteration() {
        let p = VIProblem::translation(v(&[1.0, 1.0]), orthant()).unwrap();
        let s = cyclic(&orthant());
        let x0 = v(&[2.0, 3.0]);
        let stop = ViStop {
            xstar_tol: None,
            max_iter: 6,
        };
        let vi = hybrid_descent(&p, &s, |_| 0.0, &x0, &stop, &Channels::default()).unwrap();
        let cfp = solve_cfp(&s, &x0, &StopRule::new(0.0, 6), &Channels::default()).unwrap();
        let a: Vec<_> = vi.iterates.iter().map(|(_, x)| x.clone()).collect();
        let b: Vec<_> = cfp.iterates.iter().map(|(_, x)| x.clone()).collect();
        assert_eq!(a[..b.len()], b[..]);
    }

    #[test]
    fn refuses_schedule_without_growth_bound() {
        let p = VIProblem::translation(v(&[1.0, 1.0]), orthant()).unwrap();
        let s = cyclic(&orthant())
            .subsample(crate::schedules::IndexRule::Arithmetic { start: 0, stride: 2 })
            .unwrap();
        let stop = ViStop {
            xstar_tol: None,
            max_iter: 5,
        };
        let err = solve_vi(&p, &s, &StepSequence::harmonic(1.0).unwrap(), &v(&[0.0, 0.0]), &stop, &Channels::default())
            .unwrap_err();
        assert!(matches!(err, ViError::MissingGrowthBound));
    }
}
