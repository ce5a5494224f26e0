//! End-to-end runs of a [`ProblemSpec`]: solve, VI and verify, each
//! writing its artefacts into an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{GeometryError, Vector, DEFAULT_DYKSTRA_CYCLES, ORACLE_TOL};
use crate::operators::{OperatorError, OperatorExpr};
use crate::problem::{Mode, ProblemSpec, SolverSection, SpecError, Suite, XStarRecord, XStarRule};
use crate::regularity::{
    check_aggregate, check_cutter, check_cutter_distance, check_fejer, check_sqne, check_subgradient_regularity,
    estimate_linear_modulus, fixed_points_for, CheckKind, RegularityError, RegularityReport,
};
use crate::schedules::Schedule;
use crate::solver::{
    fit_empirical_rate, sample_witnesses, solve_cfp, Channels, IterationTrace, SolverError, StopReason, StopRule,
};
use crate::vi::{solve_vi, vi_ground_truth, ViError, ViStop};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Vi(#[from] ViError),
    #[error(transparent)]
    Regularity(#[from] RegularityError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("spec has no `{0}` section")]
    MissingSection(&'static str),
    #[error("solver.mode is `{found}`, this command runs `{expected}`")]
    WrongMode { expected: &'static str, found: &'static str },
    #[error("nothing to verify: the verify section lists no suites")]
    NothingToVerify,
    #[error("{0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub mode: &'static str,
    pub schedule_kind: String,
    pub stop_reason: StopReason,
    pub steps: usize,
    pub rows: usize,
    pub rho_inf: f64,
    pub growth_bound: Option<usize>,
    pub derivation: Vec<String>,
    pub final_iterate: Vector,
    pub final_residual: Option<f64>,
    pub max_fejer_slack: Option<f64>,
    pub q_emp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_emp_note: Option<String>,
    pub xstar: Option<Vector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_xstar_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub trace: IterationTrace,
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.summary.stop_reason {
            StopReason::Converged => EXIT_OK,
            StopReason::BudgetExhausted => EXIT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    #[serde(flatten)]
    pub report: RegularityReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub pass: bool,
    pub suites: Vec<SuiteReport>,
}

impl VerifyOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_OK
        } else {
            EXIT_BUDGET
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| RunError::Io {
            path: parent.into(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.into(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serialises");
    s.push('\n');
    s
}

fn solver_section(spec: &ProblemSpec, expected: Mode) -> Result<&SolverSection, RunError> {
    let solver = spec.solver.as_ref().ok_or(RunError::MissingSection("solver"))?;
    if solver.mode != expected {
        let name = |m: Mode| match m {
            Mode::Cfp => "cfp",
            Mode::Vi => "vi",
        };
        return Err(RunError::WrongMode {
            expected: name(expected),
            found: name(solver.mode),
        });
    }
    Ok(solver)
}

fn default_center(sched: &Schedule) -> Vector {
    sched
        .target()
        .witness()
        .cloned()
        .unwrap_or_else(|| Vector::zeros(sched.dim()))
}

fn channels(spec: &ProblemSpec, solver: &SolverSection, sched: &Schedule) -> Result<Channels, RunError> {
    let witnesses = match &solver.channels.witnesses {
        Some(w) => {
            let center = w.center.clone().unwrap_or_else(|| default_center(sched));
            sample_witnesses(sched.target(), w.count, &center, w.radius, w.seed)?
        }
        None => Vec::new(),
    };
    Ok(Channels {
        dist_c: solver.channels.dist_c,
        xstar: None,
        witnesses,
        store_every: spec.output.store_every,
    })
}

fn cfp_stop(solver: &SolverSection) -> StopRule {
    StopRule {
        residual_tol: solver.stop.residual_tol,
        dist_tol: solver.stop.dist_tol,
        max_iter: solver.stop.max_iter,
    }
}

/// Empirical rate with a note, `0` on exact termination.
fn rate_of(trace: &IterationTrace) -> (Option<f64>, Option<String>) {
    match fit_empirical_rate(trace, None) {
        Ok(q) => (Some(q), None),
        Err(e @ SolverError::ExactTermination { .. }) => (Some(0.0), Some(e.to_string())),
        Err(e) => (None, Some(e.to_string())),
    }
}

fn summarise(mode: &'static str, sched: &Schedule, trace: &IterationTrace) -> RunSummary {
    let (q_emp, q_emp_note) = rate_of(trace);
    RunSummary {
        mode,
        schedule_kind: sched.kind().to_string(),
        stop_reason: trace.stop_reason,
        steps: trace.total_steps,
        rows: trace.len(),
        rho_inf: sched.rho_inf(),
        growth_bound: sched.growth_bound(),
        derivation: sched.derivation().to_vec(),
        final_iterate: trace.final_iterate.clone(),
        final_residual: trace.rows.last().map(|r| r.residual),
        max_fejer_slack: trace.max_fejer_slack(),
        q_emp,
        q_emp_note,
        xstar: trace.xstar.clone(),
        final_xstar_distance: trace.xstar.as_ref().map(|s| trace.final_iterate.distance(s)),
    }
}

fn emit(spec: &ProblemSpec, out_dir: &Path, summary: RunSummary, trace: IterationTrace) -> Result<RunOutcome, RunError> {
    let trace_path = out_dir.join(&spec.output.trace);
    let summary_path = out_dir.join(&spec.output.summary);
    write(&trace_path, &trace.to_csv())?;
    write(&summary_path, &to_json(&summary))?;
    Ok(RunOutcome {
        summary,
        trace,
        trace_path,
        summary_path,
    })
}

/// Run the feasibility iteration described by `spec`.
pub fn run_solve(spec: &ProblemSpec, out_dir: &Path) -> Result<RunOutcome, RunError> {
    let solver = solver_section(spec, Mode::Cfp)?;
    let sched = spec.schedule()?;
    let stop = cfp_stop(solver);
    let mut ch = channels(spec, solver, &sched)?;
    ch.xstar = match &solver.channels.xstar {
        None => None,
        Some(XStarRecord::Point(p)) => Some(p.clone()),
        Some(XStarRecord::Rule(XStarRule::Projection)) => {
            Some(sched.target().dykstra_project(&solver.x0, ORACLE_TOL, DEFAULT_DYKSTRA_CYCLES)?)
        }
        Some(XStarRecord::Rule(XStarRule::Limit)) => {
            let first = solve_cfp(
                &sched,
                &solver.x0,
                &stop,
                &Channels {
                    dist_c: stop.dist_tol.is_some(),
                    store_every: 0,
                    ..Channels::default()
                },
            )?;
            Some(first.final_iterate)
        }
    };
    let trace = solve_cfp(&sched, &solver.x0, &stop, &ch)?;
    log::info!("solve: {:?} after {} steps", trace.stop_reason, trace.total_steps);
    let summary = summarise("cfp", &sched, &trace);
    emit(spec, out_dir, summary, trace)
}

/// Run the hybrid steepest-descent method described by `spec`, measured
/// against the projected-gradient ground truth. The run counts as converged
/// when the final iterate lies within `vi.accept_tol` of it.
pub fn run_vi(spec: &ProblemSpec, out_dir: &Path) -> Result<RunOutcome, RunError> {
    let solver = solver_section(spec, Mode::Vi)?;
    let vi = spec.vi.as_ref().ok_or(RunError::MissingSection("vi"))?;
    let problem = spec.vi_problem()?;
    let sched = spec.schedule()?;
    let mut ch = channels(spec, solver, &sched)?;
    ch.xstar = Some(vi_ground_truth(&problem, vi.ground_truth_tol)?);
    let stop = ViStop {
        xstar_tol: solver.stop.xstar_tol,
        max_iter: solver.stop.max_iter,
    };
    let mut trace = solve_vi(&problem, &sched, &vi.steps, &solver.x0, &stop, &ch)?;
    let close = trace
        .xstar
        .as_ref()
        .is_some_and(|s| trace.final_iterate.distance(s) <= vi.accept_tol);
    if close {
        trace.stop_reason = StopReason::Converged;
    }
    log::info!("vi: {:?} after {} steps", trace.stop_reason, trace.total_steps);
    let summary = summarise("vi", &sched, &trace);
    emit(spec, out_dir, summary, trace)
}

/// Run every listed suite, writing `verify/<suite>.json` and
/// `verify/summary.json` under `out_dir`.
pub fn run_verify(spec: &ProblemSpec, out_dir: &Path) -> Result<VerifyOutcome, RunError> {
    let verify = spec.verify.as_ref().ok_or(RunError::NothingToVerify)?;
    if verify.suites.is_empty() {
        return Err(RunError::NothingToVerify);
    }
    let sched = spec.schedule()?;
    let op: OperatorExpr = match &verify.operator {
        Some(r) => spec.operator(r, "verify.operator")?,
        None => sched.operator_at(0),
    };
    let center = verify.center.clone().unwrap_or_else(|| default_center(&sched));
    let (n, seed, radius, tol) = (verify.samples, verify.seed, verify.radius, verify.tolerance);
    let mut fps: Option<Vec<Vector>> = None;
    let mut fixed_points = || -> Result<Vec<Vector>, RunError> {
        if fps.is_none() {
            fps = Some(fixed_points_for(&op, verify.fixed_points, &center, radius, seed)?);
        }
        Ok(fps.clone().unwrap_or_default())
    };
    let mut suites = Vec::new();
    for suite in &verify.suites {
        let report = match suite {
            Suite::Sqne => {
                let rho = match verify.rho {
                    Some(r) => r,
                    None => op.certificate()?.rho,
                };
                check_sqne(&op, rho, &fixed_points()?, &center, radius, n, seed, tol)?
            }
            Suite::Cutter => check_cutter(&op, &fixed_points()?, &center, radius, n, seed, tol)?,
            Suite::CutterDistance => check_cutter_distance(&op, &center, radius, n, seed, tol)?,
            Suite::Aggregate => check_aggregate(&op, &fixed_points()?, &center, radius, n, seed, tol)?,
            Suite::Fejer => {
                let solver = solver_section(spec, Mode::Cfp)?;
                let mut ch = channels(spec, solver, &sched)?;
                if ch.witnesses.is_empty() {
                    ch.witnesses = sample_witnesses(sched.target(), verify.fixed_points, &center, radius, seed)?;
                }
                ch.store_every = 0;
                check_fejer(&solve_cfp(&sched, &solver.x0, &cfp_stop(solver), &ch)?, tol)?
            }
            Suite::Modulus => {
                let bound = verify
                    .modulus_bound
                    .ok_or_else(|| RunError::InvalidArgument("suite `modulus` needs verify.modulus_bound".into()))?;
                let est = estimate_linear_modulus(&sched, sched.target(), &center, radius, n, verify.k_range, seed)?;
                let violation = est.delta_hat - bound;
                RegularityReport {
                    kind: CheckKind::Modulus,
                    pass: violation <= 0.0,
                    worst_violation: violation,
                    witness: None,
                    tolerance: 0.0,
                    seed: Some(seed),
                    evaluated: est.sample_count * verify.k_range - est.skipped,
                }
            }
            Suite::Subgradient => {
                let id = verify
                    .function
                    .as_deref()
                    .ok_or_else(|| RunError::InvalidArgument("suite `subgradient` needs verify.function".into()))?;
                let f = spec.function(id, "verify.function")?;
                let (Some(delta), Some(big_delta)) = (verify.delta, verify.big_delta) else {
                    return Err(RunError::InvalidArgument(
                        "suite `subgradient` needs verify.delta and verify.big_delta".into(),
                    ));
                };
                check_subgradient_regularity(&f, delta, big_delta, &center, radius, n, seed, tol)?
            }
        };
        log::info!("verify {}: pass = {}", suite.name(), report.pass);
        write(&out_dir.join("verify").join(format!("{}.json", suite.name())), &to_json(&report))?;
        suites.push(SuiteReport {
            suite: suite.name(),
            report,
        });
    }
    let outcome = VerifyOutcome {
        pass: suites.iter().all(|s| s.report.pass),
        suites,
    };
    write(&out_dir.join("verify").join("summary.json"), &to_json(&outcome))?;
    Ok(outcome)
}
