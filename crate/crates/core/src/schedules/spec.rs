use serde::{Deserialize, Serialize};

use crate::operators::{OperatorExpr, WEIGHT_SUM_TOL};

use super::{Schedule, ScheduleError};

/// One block `I_j^k` with weights `ω_ij` and a common relaxation `λ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockStep {
    pub blocks: Vec<Block>,
}

/// Block-iterative control. `steps` repeats with period `steps.len()`;
/// step `k` builds `T_k = ∏_j Σ_i ω_ij (S_i)_{λ_j}`, blocks applied in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub steps: Vec<BlockStep>,
    pub lambda_bounds: (f64, f64),
    pub weight_floor: f64,
}

/// An ordered string `I_j^k` with per-index relaxations `λ_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strand {
    pub indices: Vec<usize>,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringStep {
    pub strings: Vec<Strand>,
    pub weights: Vec<f64>,
}

/// String-averaging control: `T_k = Σ_j ν_j ∏_{i ∈ I_j} (S_i)_{λ_ij}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringSpec {
    pub steps: Vec<StringStep>,
    pub lambda_bounds: (f64, f64),
    pub weight_floor: f64,
}

struct Bounds {
    lo: f64,
    hi: f64,
    floor: f64,
}

impl Bounds {
    fn new(lambda_bounds: (f64, f64), floor: f64) -> Result<Self, ScheduleError> {
        let (lo, hi) = lambda_bounds;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(invalid(0, format!("lambda bounds ({lo}, {hi}) not inside (0, 1)")));
        }
        if !(floor > 0.0 && floor <= 1.0) {
            return Err(invalid(0, format!("weight floor {floor} not in (0, 1]")));
        }
        Ok(Self { lo, hi, floor })
    }

    fn lambda(&self, step: usize, lambda: f64) -> Result<(), ScheduleError> {
        if !(self.lo <= lambda && lambda <= self.hi) {
            return Err(invalid(step, format!("lambda {lambda} outside [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    fn weights(&self, step: usize, weights: &[f64]) -> Result<(), ScheduleError> {
        if let Some(w) = weights.iter().find(|&&w| !(w >= self.floor)) {
            return Err(invalid(step, format!("weight {w} below floor {}", self.floor)));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(invalid(step, format!("weights sum to {sum}")));
        }
        Ok(())
    }
}

fn invalid(step: usize, reason: String) -> ScheduleError {
    ScheduleError::InvalidSpec { step, reason }
}

fn check_primitives(primitives: &[OperatorExpr]) -> Result<(), ScheduleError> {
    if primitives.is_empty() {
        return Err(ScheduleError::Empty);
    }
    for (index, p) in primitives.iter().enumerate() {
        if !p.certificate()?.is_cutter {
            return Err(ScheduleError::NotCutter { index });
        }
    }
    Ok(())
}

fn check_indices(step: usize, indices: &[usize], m: usize, seen: &mut [bool]) -> Result<(), ScheduleError> {
    if indices.is_empty() {
        return Err(invalid(step, "empty index set".into()));
    }
    let mut local = vec![false; m];
    for &i in indices {
        if i >= m {
            return Err(invalid(step, format!("index {i} out of range for {m} primitives")));
        }
        if local[i] {
            return Err(invalid(step, format!("index {i} repeated")));
        }
        local[i] = true;
        seen[i] = true;
    }
    Ok(())
}

fn check_coverage(step: usize, seen: &[bool]) -> Result<(), ScheduleError> {
    let missing: Vec<usize> = seen.iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(ScheduleError::CoverageViolation { step, missing })
    }
}

fn relaxed(primitive: &OperatorExpr, lambda: f64) -> Result<OperatorExpr, ScheduleError> {
    Ok(OperatorExpr::relaxation(primitive.clone(), lambda)?)
}

pub(super) fn build_block(spec: &BlockSpec, primitives: &[OperatorExpr]) -> Result<Schedule, ScheduleError> {
    check_primitives(primitives)?;
    let bounds = Bounds::new(spec.lambda_bounds, spec.weight_floor)?;
    if spec.steps.is_empty() {
        return Err(ScheduleError::Empty);
    }
    let m = primitives.len();
    let mut ops = Vec::with_capacity(spec.steps.len());
    let mut structural = f64::INFINITY;
    let mut paper_route = f64::INFINITY;
    for (k, step) in spec.steps.iter().enumerate() {
        if step.blocks.is_empty() {
            return Err(invalid(k, "no blocks".into()));
        }
        let mut seen = vec![false; m];
        let mut factors = Vec::with_capacity(step.blocks.len());
        let mut route = f64::INFINITY;
        for block in &step.blocks {
            check_indices(k, &block.indices, m, &mut seen)?;
            if block.weights.len() != block.indices.len() {
                return Err(invalid(k, "weights and indices differ in length".into()));
            }
            bounds.weights(k, &block.weights)?;
            bounds.lambda(k, block.lambda)?;
            route = route.min((1.0 - block.lambda) / block.lambda);
            let children = block
                .indices
                .iter()
                .map(|&i| relaxed(&primitives[i], block.lambda))
                .collect::<Result<Vec<_>, _>>()?;
            factors.push(if children.len() == 1 {
                children.into_iter().next().expect("one child")
            } else {
                OperatorExpr::convex_combination(children, block.weights.clone())?
            });
        }
        check_coverage(k, &seen)?;
        let op = if factors.len() == 1 {
            factors.into_iter().next().expect("one factor")
        } else {
            OperatorExpr::product(factors)?
        };
        structural = structural.min(op.certificate()?.rho);
        paper_route = paper_route.min(route / step.blocks.len() as f64);
        ops.push(op);
    }
    let rho_inf = structural.max(paper_route);
    let derivation = vec![
        format!(
            "block: per-block (1 - lambda)/lambda, divided by block count: {paper_route}"
        ),
        format!(
            "block: relaxed cutters (2 - lambda)/lambda, combination min, product min/m: {structural}"
        ),
        format!("block: rho_inf = larger route = {rho_inf}"),
    ];
    Schedule::periodic("block", ops, rho_inf, derivation)
}

pub(super) fn build_string(spec: &StringSpec, primitives: &[OperatorExpr]) -> Result<Schedule, ScheduleError> {
    check_primitives(primitives)?;
    let bounds = Bounds::new(spec.lambda_bounds, spec.weight_floor)?;
    if spec.steps.is_empty() {
        return Err(ScheduleError::Empty);
    }
    let m = primitives.len();
    let mut ops = Vec::with_capacity(spec.steps.len());
    let mut structural = f64::INFINITY;
    let mut paper_route = f64::INFINITY;
    for (k, step) in spec.steps.iter().enumerate() {
        if step.strings.is_empty() {
            return Err(invalid(k, "no strings".into()));
        }
        if step.weights.len() != step.strings.len() {
            return Err(invalid(k, "weights and strings differ in length".into()));
        }
        bounds.weights(k, &step.weights)?;
        let mut seen = vec![false; m];
        let mut strings = Vec::with_capacity(step.strings.len());
        for strand in &step.strings {
            check_indices(k, &strand.indices, m, &mut seen)?;
            if strand.lambdas.len() != strand.indices.len() {
                return Err(invalid(k, "lambdas and indices differ in length".into()));
            }
            let mut route = f64::INFINITY;
            let mut factors = Vec::with_capacity(strand.indices.len());
            for (&i, &lambda) in strand.indices.iter().zip(&strand.lambdas) {
                bounds.lambda(k, lambda)?;
                route = route.min((1.0 - lambda) / lambda);
                factors.push(relaxed(&primitives[i], lambda)?);
            }
            paper_route = paper_route.min(route / strand.indices.len() as f64);
            strings.push(if factors.len() == 1 {
                factors.into_iter().next().expect("one factor")
            } else {
                OperatorExpr::product(factors)?
            });
        }
        check_coverage(k, &seen)?;
        let op = if strings.len() == 1 {
            strings.into_iter().next().expect("one string")
        } else {
            OperatorExpr::convex_combination(strings, step.weights.clone())?
        };
        structural = structural.min(op.certificate()?.rho);
        ops.push(op);
    }
    let rho_inf = structural.max(paper_route);
    let derivation = vec![
        format!("string: min (1 - lambda)/lambda over a string, divided by its length: {paper_route}"),
        format!("string: relaxed cutters (2 - lambda)/lambda, product min/m, combination min: {structural}"),
        format!("string: rho_inf = larger route = {rho_inf}"),
    ];
    Schedule::periodic("string", ops, rho_inf, derivation)
}
