//! The single-file experiment description read by the command-line driver.
//!
//! Every section is strict (`deny_unknown_fields`); parse errors carry the
//! line and column, resolution errors the dotted path of the offending
//! entry. Named objects live in sorted maps so serialisation is stable and
//! `parse(serialize(spec)) == spec`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConvexSet, SetFamily, Vector};
use crate::operators::{AffinePiece, ConvexFunction, OperatorExpr};
use crate::schedules::{BlockSpec, IndexRule, Schedule, StringSpec};
use crate::vi::{StepSequence, VIProblem};

pub const SPEC_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("spec does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{at}: unknown {kind} `{id}`")]
    UnknownReference { kind: &'static str, id: String, at: String },
    #[error("{at}: operator `{id}` refers to itself")]
    Cycle { id: String, at: String },
    #[error("{at}: {message}")]
    Invalid { at: String, message: String },
}

fn invalid(at: impl Into<String>, message: impl ToString) -> SpecError {
    SpecError::Invalid {
        at: at.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub version: String,
    pub geometry: GeometrySection,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub functions: BTreeMap<String, FunctionRecord>,
    #[serde(default)]
    pub operators: BTreeMap<String, OperatorRecord>,
    pub schedule: ScheduleRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vi: Option<ViSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub sets: BTreeMap<String, ConvexSet>,
    #[serde(default)]
    pub families: BTreeMap<String, FamilyRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyRecord {
    pub sets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceRecord {
    pub a: Vector,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionRecord {
    AffineMax {
        pieces: Vec<PieceRecord>,
        feasible_point: Vector,
    },
    DistanceMax {
        family: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feasible_point: Option<Vector>,
    },
}

/// An operator given by id or written inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OpRef {
    Id(String),
    Inline(Box<OperatorRecord>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorRecord {
    Identity,
    Projection { set: String },
    SubgradientProjection { function: String },
    FurthestProjection { family: String },
    Relaxation { child: OpRef, lambda: f64 },
    Combination { children: Vec<OpRef>, weights: Vec<f64> },
    Product { children: Vec<OpRef> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleRecord {
    Static { operator: OpRef },
    Cyclic { operators: Vec<OpRef> },
    Block { primitives: Vec<OpRef>, spec: BlockSpec },
    String { primitives: Vec<OpRef>, spec: StringSpec },
    Grouped { inner: Box<ScheduleRecord>, s: usize },
    Subsampled { inner: Box<ScheduleRecord>, indices: IndexRule },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Cfp,
    Vi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub mode: Mode,
    /// `x0` for feasibility runs, `u0` for VI runs.
    pub x0: Vector,
    pub stop: StopRecord,
    #[serde(default)]
    pub channels: ChannelsRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRecord {
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xstar_tol: Option<f64>,
    pub max_iter: usize,
}

fn default_residual_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsRecord {
    #[serde(default)]
    pub dist_c: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xstar: Option<XStarRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<WitnessRecord>,
}

/// Reference point for the `dist_xstar` channel. For VI runs it is always
/// the ground truth, and this field is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum XStarRecord {
    Point(Vector),
    Rule(XStarRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XStarRule {
    /// Dykstra projection of `x0` onto the target.
    Projection,
    /// Final iterate of a first pass with the same schedule and stop rule.
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessRecord {
    pub count: usize,
    pub seed: u64,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GRecord {
    Translation { b: Vector },
    Affine { m: Vec<Vec<f64>>, c: Vector },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViSection {
    pub g: GRecord,
    /// Family id of the constraint `C`.
    pub constraint: String,
    pub steps: StepSequence,
    #[serde(default = "default_ground_truth_tol")]
    pub ground_truth_tol: f64,
    /// A run ends "converged" when the final iterate is this close to the
    /// ground truth.
    #[serde(default = "default_accept_tol")]
    pub accept_tol: f64,
}

fn default_ground_truth_tol() -> f64 {
    1e-8
}

fn default_accept_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Sqne,
    Cutter,
    CutterDistance,
    Aggregate,
    Fejer,
    Modulus,
    Subgradient,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sqne => "sqne",
            Self::Cutter => "cutter",
            Self::CutterDistance => "cutter_distance",
            Self::Aggregate => "aggregate",
            Self::Fejer => "fejer",
            Self::Modulus => "modulus",
            Self::Subgradient => "subgradient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default)]
    pub suites: Vec<Suite>,
    /// Operator for the operator suites; defaults to `U_0` of the schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OpRef>,
    /// Constant tested by `sqne`; defaults to the certificate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub seed: u64,
    pub samples: usize,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vector>,
    #[serde(default = "default_fixed_points")]
    pub fixed_points: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Upper bound the sampled schedule modulus must not exceed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus_bound: Option<f64>,
    #[serde(default = "default_k_range")]
    pub k_range: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_delta: Option<f64>,
}

fn default_fixed_points() -> usize {
    10
}

fn default_tolerance() -> f64 {
    1e-9
}

fn default_k_range() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_trace")]
    pub trace: String,
    #[serde(default = "default_summary")]
    pub summary: String,
    #[serde(default = "default_store_every")]
    pub store_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            trace: default_trace(),
            summary: default_summary(),
            store_every: default_store_every(),
        }
    }
}

fn default_trace() -> String {
    "trace.csv".into()
}

fn default_summary() -> String {
    "summary.json".into()
}

fn default_store_every() -> usize {
    1
}

impl ProblemSpec {
    /// Parse and resolve every reference.
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialises")
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.version != SPEC_VERSION {
            return Err(invalid("version", format!("unsupported version `{}`", self.version)));
        }
        for id in self.geometry.families.keys() {
            self.family(id, &format!("geometry.families.{id}"))?;
        }
        for id in self.functions.keys() {
            self.function(id, &format!("functions.{id}"))?;
        }
        for id in self.operators.keys() {
            self.operator(&OpRef::Id(id.clone()), &format!("operators.{id}"))?;
        }
        let sched = self.schedule()?;
        if let Some(solver) = &self.solver {
            if solver.x0.dim() != sched.dim() {
                return Err(invalid(
                    "solver.x0",
                    format!("dimension {} but the schedule acts on {}", solver.x0.dim(), sched.dim()),
                ));
            }
            if solver.mode == Mode::Vi && self.vi.is_none() {
                return Err(invalid("solver.mode", "mode `vi` needs a `vi` section"));
            }
        }
        if self.vi.is_some() {
            self.vi_problem()?;
        }
        if let Some(verify) = &self.verify {
            if let Some(op) = &verify.operator {
                self.operator(op, "verify.operator")?;
            }
            if let Some(f) = &verify.function {
                self.function(f, "verify.function")?;
            }
        }
        Ok(())
    }

    /// Replace every seed in the spec.
    pub fn override_seeds(&mut self, seed: u64) {
        if let Some(w) = self.solver.as_mut().and_then(|s| s.channels.witnesses.as_mut()) {
            w.seed = seed;
        }
        if let Some(v) = self.verify.as_mut() {
            v.seed = seed;
        }
    }

    pub fn set(&self, id: &str, at: &str) -> Result<ConvexSet, SpecError> {
        self.geometry
            .sets
            .get(id)
            .cloned()
            .ok_or_else(|| SpecError::UnknownReference {
                kind: "set",
                id: id.into(),
                at: at.into(),
            })
    }

    pub fn family(&self, id: &str, at: &str) -> Result<SetFamily, SpecError> {
        let record = self.geometry.families.get(id).ok_or_else(|| SpecError::UnknownReference {
            kind: "family",
            id: id.into(),
            at: at.into(),
        })?;
        let sets = record
            .sets
            .iter()
            .enumerate()
            .map(|(i, s)| self.set(s, &format!("geometry.families.{id}.sets[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        SetFamily::new(sets, record.witness.clone()).map_err(|e| invalid(format!("geometry.families.{id}"), e))
    }

    pub fn function(&self, id: &str, at: &str) -> Result<ConvexFunction, SpecError> {
        let record = self.functions.get(id).ok_or_else(|| SpecError::UnknownReference {
            kind: "function",
            id: id.into(),
            at: at.into(),
        })?;
        let here = format!("functions.{id}");
        match record {
            FunctionRecord::AffineMax { pieces, feasible_point } => ConvexFunction::affine_max(
                pieces
                    .iter()
                    .map(|p| AffinePiece::new(p.a.clone(), p.b))
                    .collect(),
                feasible_point.clone(),
            ),
            FunctionRecord::DistanceMax { family, feasible_point } => {
                ConvexFunction::distance_max(self.family(family, &here)?, feasible_point.clone())
            }
        }
        .map_err(|e| invalid(here, e))
    }

    pub fn operator(&self, op: &OpRef, at: &str) -> Result<OperatorExpr, SpecError> {
        self.operator_inner(op, at, &mut Vec::new())
    }

    fn operator_inner(&self, op: &OpRef, at: &str, stack: &mut Vec<String>) -> Result<OperatorExpr, SpecError> {
        match op {
            OpRef::Id(id) => {
                if stack.contains(id) {
                    return Err(SpecError::Cycle {
                        id: id.clone(),
                        at: at.into(),
                    });
                }
                let record = self.operators.get(id).ok_or_else(|| SpecError::UnknownReference {
                    kind: "operator",
                    id: id.clone(),
                    at: at.into(),
                })?;
                stack.push(id.clone());
                let out = self.build_operator(record, &format!("operators.{id}"), stack);
                stack.pop();
                out
            }
            OpRef::Inline(record) => self.build_operator(record, at, stack),
        }
    }

    fn build_operator(
        &self,
        record: &OperatorRecord,
        at: &str,
        stack: &mut Vec<String>,
    ) -> Result<OperatorExpr, SpecError> {
        let children = |list: &[OpRef], stack: &mut Vec<String>| {
            list.iter()
                .enumerate()
                .map(|(i, c)| self.operator_inner(c, &format!("{at}.children[{i}]"), stack))
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(match record {
            OperatorRecord::Identity => OperatorExpr::identity(),
            OperatorRecord::Projection { set } => OperatorExpr::projection(self.set(set, at)?),
            OperatorRecord::SubgradientProjection { function } => {
                OperatorExpr::subgradient_projection(self.function(function, at)?)
            }
            OperatorRecord::FurthestProjection { family } => {
                OperatorExpr::furthest_projection(self.family(family, at)?)
            }
            OperatorRecord::Relaxation { child, lambda } => {
                let child = self.operator_inner(child, &format!("{at}.child"), stack)?;
                OperatorExpr::relaxation(child, *lambda).map_err(|e| invalid(at, e))?
            }
            OperatorRecord::Combination { children: list, weights } => {
                OperatorExpr::convex_combination(children(list, stack)?, weights.clone()).map_err(|e| invalid(at, e))?
            }
            OperatorRecord::Product { children: list } => {
                OperatorExpr::product(children(list, stack)?).map_err(|e| invalid(at, e))?
            }
        })
    }

    pub fn schedule(&self) -> Result<Schedule, SpecError> {
        self.build_schedule(&self.schedule, "schedule")
    }

    fn build_schedule(&self, record: &ScheduleRecord, at: &str) -> Result<Schedule, SpecError> {
        let ops = |list: &[OpRef], field: &str| {
            list.iter()
                .enumerate()
                .map(|(i, c)| self.operator(c, &format!("{at}.{field}[{i}]")))
                .collect::<Result<Vec<_>, _>>()
        };
        match record {
            ScheduleRecord::Static { operator } => {
                Schedule::static_schedule(self.operator(operator, &format!("{at}.operator"))?)
            }
            ScheduleRecord::Cyclic { operators } => Schedule::cyclic(ops(operators, "operators")?),
            ScheduleRecord::Block { primitives, spec } => Schedule::block(spec, &ops(primitives, "primitives")?),
            ScheduleRecord::String { primitives, spec } => Schedule::string(spec, &ops(primitives, "primitives")?),
            ScheduleRecord::Grouped { inner, s } => self.build_schedule(inner, &format!("{at}.inner"))?.group(*s),
            ScheduleRecord::Subsampled { inner, indices } => self
                .build_schedule(inner, &format!("{at}.inner"))?
                .subsample(indices.clone()),
        }
        .map_err(|e| invalid(at, e))
    }

    pub fn vi_problem(&self) -> Result<VIProblem, SpecError> {
        let vi = self.vi.as_ref().ok_or_else(|| invalid("vi", "section missing"))?;
        let constraint = self.family(&vi.constraint, "vi.constraint")?;
        match &vi.g {
            GRecord::Translation { b } => VIProblem::translation(b.clone(), constraint),
            GRecord::Affine { m, c } => VIProblem::affine(m, c.clone(), constraint),
        }
        .map_err(|e| invalid("vi.g", e))
    }
}
