//! Python bindings: sets, operators, schedules, the two solvers and the
//! sampled checks. Points cross the boundary as lists of floats.

use std::path::Path;

use fejerkit::geometry::{ConvexSet, SetFamily, Vector, ORACLE_TOL};
use fejerkit::operators::{AffinePiece, ConvexFunction, OperatorExpr};
use fejerkit::regularity::{self, RegularityReport};
use fejerkit::schedules::Schedule;
use fejerkit::solver::{self, Channels, IterationTrace, StopReason, StopRule};
use fejerkit::vi::{self, StepSequence, VIProblem, ViStop};
use fejerkit::{instances, runner, ProblemSpec};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vector(x: Vec<f64>) -> PyResult<Vector> {
    Vector::new(x).map_err(err)
}

fn vectors(xs: Vec<Vec<f64>>) -> PyResult<Vec<Vector>> {
    xs.into_iter().map(vector).collect()
}

#[pyclass(name = "ConvexSet", module = "fejerkit_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyConvexSet {
    inner: ConvexSet,
}

#[pymethods]
impl PyConvexSet {
    #[staticmethod]
    fn half_space(a: Vec<f64>, b: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ConvexSet::half_space(vector(a)?, b).map_err(err)?,
        })
    }

    #[staticmethod]
    fn hyperplane(a: Vec<f64>, b: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ConvexSet::hyperplane(vector(a)?, b).map_err(err)?,
        })
    }

    #[staticmethod]
    fn ball(center: Vec<f64>, radius: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ConvexSet::ball(vector(center)?, radius).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(name = "box")]
    fn bounding_box(lower: Vec<f64>, upper: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: ConvexSet::bounding_box(vector(lower)?, vector(upper)?).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn project(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.project(&vector(x)?).map_err(err)?.into_inner())
    }

    fn distance(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.distance(&vector(x)?).map_err(err)
    }

    #[pyo3(signature = (x, tol = 1e-10))]
    fn contains(&self, x: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.inner.contains(&vector(x)?, tol).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner.shape())
    }
}

#[pyclass(name = "SetFamily", module = "fejerkit_py", frozen, from_py_object)]
#[derive(Clone)]
struct PySetFamily {
    inner: SetFamily,
}

#[pymethods]
impl PySetFamily {
    #[new]
    #[pyo3(signature = (sets, witness = None))]
    fn new(sets: Vec<PyConvexSet>, witness: Option<Vec<f64>>) -> PyResult<Self> {
        let witness = witness.map(vector).transpose()?;
        Ok(Self {
            inner: SetFamily::new(sets.into_iter().map(|s| s.inner).collect(), witness).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Dykstra projection onto the intersection.
    #[pyo3(signature = (x, tol = ORACLE_TOL))]
    fn project(&self, x: Vec<f64>, tol: f64) -> PyResult<Vec<f64>> {
        let p = self
            .inner
            .dykstra_project(&vector(x)?, tol, fejerkit::geometry::DEFAULT_DYKSTRA_CYCLES)
            .map_err(err)?;
        Ok(p.into_inner())
    }

    #[pyo3(signature = (x, tol = ORACLE_TOL))]
    fn distance(&self, x: Vec<f64>, tol: f64) -> PyResult<f64> {
        self.inner.distance_intersection(&vector(x)?, tol).map_err(err)
    }

    fn furthest_set_index(&self, x: Vec<f64>) -> PyResult<usize> {
        self.inner.furthest_set_index(&vector(x)?).map_err(err)
    }
}

#[pyclass(name = "Operator", module = "fejerkit_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyOperator {
    inner: OperatorExpr,
}

fn ops(list: Vec<PyOperator>) -> Vec<OperatorExpr> {
    list.into_iter().map(|o| o.inner).collect()
}

#[pymethods]
impl PyOperator {
    #[staticmethod]
    fn identity() -> Self {
        Self {
            inner: OperatorExpr::identity(),
        }
    }

    #[staticmethod]
    fn projection(set: &PyConvexSet) -> Self {
        Self {
            inner: OperatorExpr::projection(set.inner.clone()),
        }
    }

    /// Subgradient projection of `max_i (<a_i, x> - b_i)`.
    #[staticmethod]
    fn subgradient_projection(normals: Vec<Vec<f64>>, offsets: Vec<f64>, feasible_point: Vec<f64>) -> PyResult<Self> {
        if normals.len() != offsets.len() {
            return Err(PyValueError::new_err("normals and offsets differ in length"));
        }
        let pieces = vectors(normals)?
            .into_iter()
            .zip(offsets)
            .map(|(a, b)| AffinePiece::new(a, b))
            .collect();
        let f = ConvexFunction::affine_max(pieces, vector(feasible_point)?).map_err(err)?;
        Ok(Self {
            inner: OperatorExpr::subgradient_projection(f),
        })
    }

    #[staticmethod]
    fn furthest_projection(family: &PySetFamily) -> Self {
        Self {
            inner: OperatorExpr::furthest_projection(family.inner.clone()),
        }
    }

    #[staticmethod]
    fn relaxation(child: &PyOperator, lam: f64) -> PyResult<Self> {
        Ok(Self {
            inner: OperatorExpr::relaxation(child.inner.clone(), lam).map_err(err)?,
        })
    }

    #[staticmethod]
    fn combination(children: Vec<PyOperator>, weights: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: OperatorExpr::convex_combination(ops(children), weights).map_err(err)?,
        })
    }

    #[staticmethod]
    fn product(children: Vec<PyOperator>) -> PyResult<Self> {
        Ok(Self {
            inner: OperatorExpr::product(ops(children)).map_err(err)?,
        })
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.apply(&vector(x)?).map_err(err)?.into_inner())
    }

    fn residual(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.residual(&vector(x)?).map_err(err)
    }

    /// `(rho, derivation)`.
    fn certificate(&self) -> PyResult<(f64, Vec<String>)> {
        let c = self.inner.certificate().map_err(err)?;
        Ok((c.rho, c.derivation))
    }
}

#[pyclass(name = "Schedule", module = "fejerkit_py", frozen, from_py_object)]
#[derive(Clone)]
struct PySchedule {
    inner: Schedule,
}

#[pymethods]
impl PySchedule {
    #[staticmethod]
    #[pyo3(name = "static")]
    fn static_schedule(op: &PyOperator) -> PyResult<Self> {
        Ok(Self {
            inner: Schedule::static_schedule(op.inner.clone()).map_err(err)?,
        })
    }

    #[staticmethod]
    fn cyclic(operators: Vec<PyOperator>) -> PyResult<Self> {
        Ok(Self {
            inner: Schedule::cyclic(ops(operators)).map_err(err)?,
        })
    }

    fn group(&self, s: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.group(s).map_err(err)?,
        })
    }

    #[getter]
    fn rho_inf(&self) -> f64 {
        self.inner.rho_inf()
    }

    #[getter]
    fn growth_bound(&self) -> Option<usize> {
        self.inner.growth_bound()
    }

    #[getter]
    fn target(&self) -> PySetFamily {
        PySetFamily {
            inner: self.inner.target().clone(),
        }
    }

    fn apply_at(&self, k: usize, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.apply_at(k, &vector(x)?).map_err(err)?.into_inner())
    }
}

#[pyclass(name = "Trace", module = "fejerkit_py", frozen)]
struct PyTrace {
    inner: IterationTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn converged(&self) -> bool {
        self.inner.stop_reason == StopReason::Converged
    }

    #[getter]
    fn total_steps(&self) -> usize {
        self.inner.total_steps
    }

    #[getter]
    fn final_iterate(&self) -> Vec<f64> {
        self.inner.final_iterate.as_slice().to_vec()
    }

    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.residual).collect()
    }

    #[getter]
    fn dist_c(&self) -> Vec<Option<f64>> {
        self.inner.rows.iter().map(|r| r.dist_c).collect()
    }

    #[getter]
    fn max_fejer_slack(&self) -> Option<f64> {
        self.inner.max_fejer_slack()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// Least-squares contraction factor of the distance channel.
    #[pyo3(signature = (burn_in = None))]
    fn empirical_rate(&self, burn_in: Option<usize>) -> PyResult<f64> {
        solver::fit_empirical_rate(&self.inner, burn_in).map_err(err)
    }
}

#[pyclass(name = "VIProblem", module = "fejerkit_py", frozen)]
struct PyVIProblem {
    inner: VIProblem,
}

#[pymethods]
impl PyVIProblem {
    /// `G(u) = u - b`.
    #[staticmethod]
    fn translation(b: Vec<f64>, constraint: &PySetFamily) -> PyResult<Self> {
        Ok(Self {
            inner: VIProblem::translation(vector(b)?, constraint.inner.clone()).map_err(err)?,
        })
    }

    /// `G(u) = M u + c`.
    #[staticmethod]
    fn affine(m: Vec<Vec<f64>>, c: Vec<f64>, constraint: &PySetFamily) -> PyResult<Self> {
        Ok(Self {
            inner: VIProblem::affine(&m, vector(c)?, constraint.inner.clone()).map_err(err)?,
        })
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta()
    }

    #[getter]
    fn kappa_g(&self) -> f64 {
        self.inner.kappa_g()
    }

    #[pyo3(signature = (tol = 1e-8))]
    fn ground_truth(&self, tol: f64) -> PyResult<Vec<f64>> {
        Ok(vi::vi_ground_truth(&self.inner, tol).map_err(err)?.into_inner())
    }
}

fn report_dict<'py>(py: Python<'py>, r: &RegularityReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("pass", r.pass)?;
    d.set_item("worst_violation", r.worst_violation)?;
    d.set_item("tolerance", r.tolerance)?;
    d.set_item("evaluated", r.evaluated)?;
    d.set_item("seed", r.seed)?;
    d.set_item(
        "witness",
        r.witness.as_ref().and_then(|w| w.input.as_ref()).map(|x| x.as_slice().to_vec()),
    )?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (schedule, x0, residual_tol = 1e-10, max_iter = 10_000, dist_c = false, witnesses = None, xstar = None))]
fn solve_cfp(
    schedule: &PySchedule,
    x0: Vec<f64>,
    residual_tol: f64,
    max_iter: usize,
    dist_c: bool,
    witnesses: Option<Vec<Vec<f64>>>,
    xstar: Option<Vec<f64>>,
) -> PyResult<PyTrace> {
    let channels = Channels {
        dist_c,
        xstar: xstar.map(vector).transpose()?,
        witnesses: vectors(witnesses.unwrap_or_default())?,
        store_every: 0,
    };
    let trace = solver::solve_cfp(&schedule.inner, &vector(x0)?, &StopRule::new(residual_tol, max_iter), &channels)
        .map_err(err)?;
    Ok(PyTrace { inner: trace })
}

/// Hybrid steepest descent with `lambda_k = lambda0 / (k+1)^p`.
#[pyfunction]
#[pyo3(signature = (problem, schedule, u0, lambda0 = 1.0, p = 1.0, max_iter = 10_000))]
fn solve_vi(
    problem: &PyVIProblem,
    schedule: &PySchedule,
    u0: Vec<f64>,
    lambda0: f64,
    p: f64,
    max_iter: usize,
) -> PyResult<PyTrace> {
    let steps = if p == 1.0 {
        StepSequence::harmonic(lambda0)
    } else {
        StepSequence::power(lambda0, p)
    }
    .map_err(err)?;
    let channels = Channels {
        store_every: 0,
        ..Channels::default()
    };
    let stop = ViStop {
        xstar_tol: None,
        max_iter,
    };
    let trace = vi::solve_vi(&problem.inner, &schedule.inner, &steps, &vector(u0)?, &stop, &channels).map_err(err)?;
    Ok(PyTrace { inner: trace })
}

#[pyfunction]
#[pyo3(signature = (op, rho, center, radius, samples = 1000, seed = 0, tol = 1e-9, fixed_points = 10))]
#[allow(clippy::too_many_arguments)]
fn check_sqne<'py>(
    py: Python<'py>,
    op: &PyOperator,
    rho: f64,
    center: Vec<f64>,
    radius: f64,
    samples: usize,
    seed: u64,
    tol: f64,
    fixed_points: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let c = vector(center)?;
    let fps = regularity::fixed_points_for(&op.inner, fixed_points, &c, radius, seed).map_err(err)?;
    let r = regularity::check_sqne(&op.inner, rho, &fps, &c, radius, samples, seed, tol).map_err(err)?;
    report_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (op, center, radius, samples = 1000, seed = 0, tol = 1e-9, fixed_points = 10))]
#[allow(clippy::too_many_arguments)]
fn check_cutter<'py>(
    py: Python<'py>,
    op: &PyOperator,
    center: Vec<f64>,
    radius: f64,
    samples: usize,
    seed: u64,
    tol: f64,
    fixed_points: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let c = vector(center)?;
    let fps = regularity::fixed_points_for(&op.inner, fixed_points, &c, radius, seed).map_err(err)?;
    let r = regularity::check_cutter(&op.inner, &fps, &c, radius, samples, seed, tol).map_err(err)?;
    report_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (schedule, center, radius, samples = 1000, k_range = 1, seed = 0))]
fn estimate_linear_modulus(
    schedule: &PySchedule,
    center: Vec<f64>,
    radius: f64,
    samples: usize,
    k_range: usize,
    seed: u64,
) -> PyResult<f64> {
    let s = &schedule.inner;
    let e = regularity::estimate_linear_modulus(s, s.target(), &vector(center)?, radius, samples, k_range, seed)
        .map_err(err)?;
    Ok(e.delta_hat)
}

#[pyfunction]
fn theoretical_rate(rho: f64, delta: f64) -> PyResult<f64> {
    solver::theoretical_rate(rho, delta).map_err(err)
}

/// `(c', q')` for a bound known on every `s`-th iterate.
#[pyfunction]
fn rate_rescale(c: f64, q: f64, s: usize) -> PyResult<(f64, f64)> {
    let b = solver::rate_rescale(c, q, s).map_err(err)?;
    Ok((b.c, b.q))
}

/// Run a spec file (`mode` is `solve`, `vi` or `verify`) and return the exit
/// status together with the summary JSON.
#[pyfunction]
#[pyo3(signature = (path, out_dir, mode = "solve"))]
fn run_spec(path: &str, out_dir: &str, mode: &str) -> PyResult<(i32, String)> {
    let spec = ProblemSpec::load(Path::new(path)).map_err(err)?;
    let out = Path::new(out_dir);
    match mode {
        "solve" => {
            let o = runner::run_solve(&spec, out).map_err(err)?;
            Ok((o.exit_code(), to_json(&o.summary)))
        }
        "vi" => {
            let o = runner::run_vi(&spec, out).map_err(err)?;
            Ok((o.exit_code(), to_json(&o.summary)))
        }
        "verify" => {
            let o = runner::run_verify(&spec, out).map_err(err)?;
            Ok((o.exit_code(), to_json(&o)))
        }
        other => Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    }
}

/// Generated spec as JSON: `kind` is `wedge` (uses `angle`), `orthant`,
/// `polyhedron` or `slater` (use `dim`, and `m` for the last two).
#[pyfunction]
#[pyo3(signature = (kind, seed = 0, angle = None, dim = None, m = None))]
fn gen_instance(kind: &str, seed: u64, angle: Option<f64>, dim: Option<usize>, m: Option<usize>) -> PyResult<String> {
    let need = |v: Option<usize>, name: &str| v.ok_or_else(|| PyValueError::new_err(format!("`{kind}` needs {name}")));
    let k = match kind {
        "wedge" => instances::InstanceKind::Wedge {
            angle: angle.ok_or_else(|| PyValueError::new_err("`wedge` needs angle"))?,
        },
        "orthant" => instances::InstanceKind::Orthant { dim: need(dim, "dim")? },
        "polyhedron" => instances::InstanceKind::RandomPolyhedron {
            dim: need(dim, "dim")?,
            m: need(m, "m")?,
        },
        "slater" => instances::InstanceKind::SlaterPolyhedral {
            dim: need(dim, "dim")?,
            m: need(m, "m")?,
        },
        other => return Err(PyValueError::new_err(format!("unknown instance kind `{other}`"))),
    };
    Ok(instances::gen_instance(k, seed).map_err(err)?.to_json())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("summary serialises")
}

#[pymodule]
fn fejerkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConvexSet>()?;
    m.add_class::<PySetFamily>()?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyVIProblem>()?;
    m.add_function(wrap_pyfunction!(solve_cfp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_vi, m)?)?;
    m.add_function(wrap_pyfunction!(check_sqne, m)?)?;
    m.add_function(wrap_pyfunction!(check_cutter, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_linear_modulus, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_rate, m)?)?;
    m.add_function(wrap_pyfunction!(rate_rescale, m)?)?;
    m.add_function(wrap_pyfunction!(run_spec, m)?)?;
    m.add_function(wrap_pyfunction!(gen_instance, m)?)?;
    Ok(())
}
