//! Control sequences `k ↦ U_k`.
//!
//! Every shipped schedule is periodic at the bottom: static, cyclic, block
//! and string rules precompute one operator tree per position of the
//! period. Grouping and subsampling wrap another schedule. Each schedule
//! carries a certified `rho_inf`, a target family `C ⊆ ⋂_k Fix U_k`, and the
//! indices of the target's sets that each step enforces, which is enough to
//! compute the growth bound `s` exactly.

mod spec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConvexSet, GeometryError, SetFamily, Vector, WITNESS_TOL};
use crate::operators::{OperatorError, OperatorExpr};

pub use spec::{Block, BlockSpec, BlockStep, StringSpec, StringStep, Strand};

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("operator at position {position} has rho = {rho}; schedules need rho > 0")]
    NotStronglyQne { position: usize, rho: f64 },
    #[error("schedule needs at least one operator")]
    Empty,
    #[error("grouping factor must be >= 1, got {0}")]
    InvalidGroup(usize),
    #[error("index rule is not strictly increasing: {0}")]
    NonMonotoneIndices(String),
    #[error("step {step} does not cover primitives {missing:?}")]
    CoverageViolation { step: usize, missing: Vec<usize> },
    #[error("primitive {index} is not a cutter")]
    NotCutter { index: usize },
    #[error("invalid spec at step {step}: {reason}")]
    InvalidSpec { step: usize, reason: String },
    #[error("every operator fixes the whole space; no target family")]
    NoTarget,
    #[error("set {index} missing from window starting at step {start} (s = {s})")]
    GrowthViolation { index: usize, start: usize, s: usize },
}

/// Strictly increasing index sequence `k ↦ n_k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexRule {
    /// `n_k = start + k * stride`.
    Arithmetic { start: usize, stride: usize },
    /// `n_k = (k / L) * period + offsets[k % L]`, `L = offsets.len()`.
    Periodic { offsets: Vec<usize>, period: usize },
}

impl IndexRule {
    pub fn identity() -> Self {
        Self::Arithmetic { start: 0, stride: 1 }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        match self {
            Self::Arithmetic { stride, .. } => {
                if *stride == 0 {
                    return Err(ScheduleError::NonMonotoneIndices("stride 0".into()));
                }
            }
            Self::Periodic { offsets, period } => {
                if offsets.is_empty() {
                    return Err(ScheduleError::NonMonotoneIndices("no offsets".into()));
                }
                if offsets.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(ScheduleError::NonMonotoneIndices(format!("offsets {offsets:?}")));
                }
                if offsets.last().is_some_and(|&o| o >= *period) {
                    return Err(ScheduleError::NonMonotoneIndices(format!(
                        "offset {} >= period {period}",
                        offsets.last().unwrap()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn index(&self, k: usize) -> usize {
        match self {
            Self::Arithmetic { start, stride } => start + k * stride,
            Self::Periodic { offsets, period } => (k / offsets.len()) * period + offsets[k % offsets.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Rule {
    Periodic {
        ops: Vec<OperatorExpr>,
        coverage: Vec<Vec<usize>>,
    },
    Grouped {
        inner: Box<Schedule>,
        s: usize,
    },
    Subsampled {
        inner: Box<Schedule>,
        indices: IndexRule,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: String,
    rule: Rule,
    rho_inf: f64,
    growth_bound: Option<usize>,
    target: SetFamily,
    period: usize,
    derivation: Vec<String>,
}

impl Schedule {
    /// `U_k = op` for every `k`.
    pub fn static_schedule(op: OperatorExpr) -> Result<Self, ScheduleError> {
        let rho = positive_rho(0, &op)?;
        let derivation = vec![format!("static: rho_inf = certificate rho = {rho}")];
        Self::periodic("static", vec![op], rho, derivation)
    }

    /// `U_k = ops[k mod m]`.
    pub fn cyclic(ops: Vec<OperatorExpr>) -> Result<Self, ScheduleError> {
        if ops.is_empty() {
            return Err(ScheduleError::Empty);
        }
        let mut rho = f64::INFINITY;
        for (i, op) in ops.iter().enumerate() {
            rho = rho.min(positive_rho(i, op)?);
        }
        let derivation = vec![format!("cyclic over {}: rho_inf = min certificate = {rho}", ops.len())];
        Self::periodic("cyclic", ops, rho, derivation)
    }

    pub fn block(spec: &BlockSpec, primitives: &[OperatorExpr]) -> Result<Self, ScheduleError> {
        spec::build_block(spec, primitives)
    }

    pub fn string(spec: &StringSpec, primitives: &[OperatorExpr]) -> Result<Self, ScheduleError> {
        spec::build_string(spec, primitives)
    }

    /// Steps `k s, ..., k s + s - 1` of `self` fused into grouped step `k`.
    pub fn group(&self, s: usize) -> Result<Self, ScheduleError> {
        if s == 0 {
            return Err(ScheduleError::InvalidGroup(s));
        }
        if s == 1 {
            return Ok(self.clone());
        }
        let rho_inf = self.rho_inf / s as f64;
        let mut derivation = self.derivation.clone();
        derivation.push(format!("grouped by {s}: rho_inf = {} / {s} = {rho_inf}", self.rho_inf));
        let period = self.period / gcd(self.period, s);
        let mut out = Self {
            kind: format!("grouped({}, {s})", self.kind),
            rule: Rule::Grouped {
                inner: Box::new(self.clone()),
                s,
            },
            rho_inf,
            growth_bound: None,
            target: self.target.clone(),
            period,
            derivation,
        };
        out.growth_bound = out.compute_growth();
        Ok(out)
    }

    /// `k ↦ U_{n_k}` for a strictly increasing index rule.
    pub fn subsample(&self, indices: IndexRule) -> Result<Self, ScheduleError> {
        indices.validate()?;
        let p = self.period;
        let period = match &indices {
            IndexRule::Arithmetic { stride, .. } => p / gcd(p, *stride),
            IndexRule::Periodic { offsets, period } => offsets.len() * (p / gcd(p, *period)),
        };
        let mut derivation = self.derivation.clone();
        derivation.push(format!("subsequence: rho_inf unchanged = {}", self.rho_inf));
        let mut out = Self {
            kind: format!("subsampled({})", self.kind),
            rule: Rule::Subsampled {
                inner: Box::new(self.clone()),
                indices,
            },
            rho_inf: self.rho_inf,
            growth_bound: None,
            target: self.target.clone(),
            period,
            derivation,
        };
        out.growth_bound = out.compute_growth();
        Ok(out)
    }

    pub(crate) fn periodic(
        kind: &str,
        ops: Vec<OperatorExpr>,
        rho_inf: f64,
        derivation: Vec<String>,
    ) -> Result<Self, ScheduleError> {
        let (target, coverage) = assemble_target(&ops)?;
        let period = ops.len();
        let mut out = Self {
            kind: kind.into(),
            rule: Rule::Periodic { ops, coverage },
            rho_inf,
            growth_bound: None,
            target,
            period,
            derivation,
        };
        out.growth_bound = out.compute_growth();
        Ok(out)
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn rho_inf(&self) -> f64 {
        self.rho_inf
    }

    /// Every target set is enforced in every window of this many steps.
    pub fn growth_bound(&self) -> Option<usize> {
        self.growth_bound
    }

    pub fn target(&self) -> &SetFamily {
        &self.target
    }

    pub fn derivation(&self) -> &[String] {
        &self.derivation
    }

    /// Length after which [`covered_at`](Self::covered_at) repeats.
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn operator_at(&self, k: usize) -> OperatorExpr {
        match &self.rule {
            Rule::Periodic { ops, .. } => ops[k % ops.len()].clone(),
            Rule::Grouped { inner, s } => {
                OperatorExpr::Product((0..*s).map(|j| inner.operator_at(k * s + j)).collect())
            }
            Rule::Subsampled { inner, indices } => inner.operator_at(indices.index(k)),
        }
    }

    /// Apply `U_k` without cloning the tree for periodic rules.
    pub fn apply_at(&self, k: usize, x: &Vector) -> Result<Vector, OperatorError> {
        match &self.rule {
            Rule::Periodic { ops, .. } => ops[k % ops.len()].apply(x),
            Rule::Grouped { inner, s } => {
                let mut y = x.clone();
                for j in 0..*s {
                    y = inner.apply_at(k * s + j, &y)?;
                }
                Ok(y)
            }
            Rule::Subsampled { inner, indices } => inner.apply_at(indices.index(k), x),
        }
    }

    /// Sorted indices of target sets enforced by `U_k`.
    pub fn covered_at(&self, k: usize) -> Vec<usize> {
        match &self.rule {
            Rule::Periodic { coverage, .. } => coverage[k % coverage.len()].clone(),
            Rule::Grouped { inner, s } => {
                let mut out: Vec<usize> = (0..*s).flat_map(|j| inner.covered_at(k * s + j)).collect();
                out.sort_unstable();
                out.dedup();
                out
            }
            Rule::Subsampled { inner, indices } => inner.covered_at(indices.index(k)),
        }
    }

    /// Check the growth bound literally on every window starting below
    /// `horizon`.
    pub fn audit_growth(&self, horizon: usize) -> Result<(), ScheduleError> {
        let Some(s) = self.growth_bound else {
            return Ok(());
        };
        let m = self.target.len();
        let covered: Vec<Vec<usize>> = (0..horizon + s).map(|k| self.covered_at(k)).collect();
        for start in 0..horizon {
            let mut seen = vec![false; m];
            for c in &covered[start..start + s] {
                for &i in c {
                    seen[i] = true;
                }
            }
            if let Some(index) = seen.iter().position(|&b| !b) {
                return Err(ScheduleError::GrowthViolation { index, start, s });
            }
        }
        Ok(())
    }

    /// Largest cyclic gap between enforcements of a set over one period.
    fn compute_growth(&self) -> Option<usize> {
        let p = self.period;
        let mut positions: Vec<Vec<usize>> = vec![Vec::new(); self.target.len()];
        for k in 0..p {
            for i in self.covered_at(k) {
                positions[i].push(k);
            }
        }
        let mut s = 1;
        for pos in &positions {
            let first = *pos.first()?;
            let mut gap = first + p - pos.last().expect("nonempty");
            for w in pos.windows(2) {
                gap = gap.max(w[1] - w[0]);
            }
            s = s.max(gap);
        }
        Some(s)
    }
}

fn positive_rho(position: usize, op: &OperatorExpr) -> Result<f64, ScheduleError> {
    let rho = op.certificate()?.rho;
    if !(rho > 0.0) {
        return Err(ScheduleError::NotStronglyQne { position, rho });
    }
    Ok(rho)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Union of the fixed-point families (equal sets merged) and the indices
/// each operator enforces.
fn assemble_target(ops: &[OperatorExpr]) -> Result<(SetFamily, Vec<Vec<usize>>), ScheduleError> {
    let mut sets: Vec<ConvexSet> = Vec::new();
    let mut witnesses: Vec<Vector> = Vec::new();
    let mut coverage = Vec::with_capacity(ops.len());
    for op in ops {
        let fix = op.fixed_point_superset()?;
        let mut covered = Vec::new();
        if !fix.is_whole_space() {
            let family = match fix.to_family() {
                Ok(f) => f,
                Err(OperatorError::WholeSpace) => {
                    coverage.push(covered);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            witnesses.extend(family.witness().cloned());
            for set in family.sets() {
                let i = match sets.iter().position(|s| s == set) {
                    Some(i) => i,
                    None => {
                        sets.push(set.clone());
                        sets.len() - 1
                    }
                };
                covered.push(i);
            }
        }
        covered.sort_unstable();
        covered.dedup();
        coverage.push(covered);
    }
    if sets.is_empty() {
        return Err(ScheduleError::NoTarget);
    }
    let bare = SetFamily::new(sets, None)?;
    let witness = witnesses
        .into_iter()
        .find(|w| bare.max_member_distance(w).is_ok_and(|d| d <= WITNESS_TOL));
    let target = match witness {
        Some(w) => bare.with_witness(w)?,
        None => bare,
    };
    Ok((target, coverage))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c).unwrap()
    }

    fn proj(a: &[f64], b: f64) -> OperatorExpr {
        OperatorExpr::projection(ConvexSet::half_space(v(a), b).unwrap())
    }

    fn orthant() -> (OperatorExpr, OperatorExpr) {
        (proj(&[1.0, 0.0], 0.0), proj(&[0.0, 1.0], 0.0))
    }

    #[test]
    fn static_metadata() {
        let (a, b) = orthant();
        let s = Schedule::static_schedule(a.clone()).unwrap();
        assert_eq!(s.operator_at(0), s.operator_at(17));
        assert_eq!(s.growth_bound(), Some(1));
        let prod = OperatorExpr::product(vec![a.clone(), b.clone(), a.clone()]).unwrap();
        let s = Schedule::static_schedule(prod).unwrap();
        assert!((s.rho_inf() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.target().len(), 2);
        let comb = OperatorExpr::convex_combination(vec![a, b], vec![0.5, 0.5]).unwrap();
        assert_eq!(Schedule::static_schedule(comb).unwrap().rho_inf(), 1.0);
    }

    #[test]
    fn zero_rho_rejected() {
        let reflect = OperatorExpr::relaxation(proj(&[1.0], 0.0), 2.0).unwrap();
        assert!(matches!(
            Schedule::static_schedule(reflect),
            Err(ScheduleError::NotStronglyQne { .. })
        ));
        assert!(matches!(Schedule::cyclic(vec![]), Err(ScheduleError::Empty)));
    }

    #[test]
    fn cyclic_rule_and_growth() {
        let (a, b) = orthant();
        let s = Schedule::cyclic(vec![a, b.clone()]).unwrap();
        assert_eq!(s.operator_at(5), b);
        assert_eq!(s.growth_bound(), Some(2));
        assert_eq!(s.rho_inf(), 1.0);
        s.audit_growth(100).unwrap();
    }

    #[test]
    fn almost_cyclic_growth_is_largest_gap() {
        let (a, b) = orthant();
        let c = proj(&[1.0, 1.0], 1.0);
        let s = Schedule::cyclic(vec![a.clone(), b, a, c]).unwrap();
        assert_eq!(s.target().len(), 3);
        assert_eq!(s.growth_bound(), Some(4));
        s.audit_growth(50).unwrap();
    }

    #[test]
    fn grouping() {
        let (a, b) = orthant();
        let s = Schedule::cyclic(vec![a.clone(), b.clone()]).unwrap();
        assert_eq!(s.group(1).unwrap(), s);
        let g = s.group(2).unwrap();
        assert_eq!(g.operator_at(3), OperatorExpr::Product(vec![a, b]));
        assert_eq!(g.rho_inf(), 0.5);
        assert_eq!(g.growth_bound(), Some(1));
        assert!(matches!(s.group(0), Err(ScheduleError::InvalidGroup(0))));
        let g3 = s.group(3).unwrap();
        assert_eq!(g3.growth_bound(), Some(1));
        g3.audit_growth(20).unwrap();
    }

    #[test]
    fn subsampling() {
        let (a, b) = orthant();
        let s = Schedule::cyclic(vec![a.clone(), b]).unwrap();
        assert_eq!(s.subsample(IndexRule::identity()).unwrap().operator_at(7), s.operator_at(7));
        let even = s.subsample(IndexRule::Arithmetic { start: 0, stride: 2 }).unwrap();
        assert_eq!(even.operator_at(0), a);
        assert_eq!(even.operator_at(9), a);
        assert_eq!(even.growth_bound(), None);
        assert!(s
            .subsample(IndexRule::Periodic {
                offsets: vec![1, 1],
                period: 3
            })
            .is_err());
        let p = s
            .subsample(IndexRule::Periodic {
                offsets: vec![0, 3],
                period: 4,
            })
            .unwrap();
        assert_eq!(p.growth_bound(), Some(2));
        p.audit_growth(40).unwrap();
    }

    #[test]
    fn apply_at_matches_operator_at() {
        let (a, b) = orthant();
        let g = Schedule::cyclic(vec![a, b]).unwrap().group(3).unwrap();
        let x = v(&[1.5, 2.5]);
        for k in 0..5 {
            assert_eq!(g.apply_at(k, &x).unwrap(), g.operator_at(k).apply(&x).unwrap());
        }
    }
}
