use crate::geometry::{ConvexSet, GeometryError, SetFamily, Vector};

use super::{ConvexFunction, OperatorError};

/// Tolerance on `sum(weights) = 1` for convex combinations.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// An operator tree. Build through the checked constructors; the enum is
/// public so callers can inspect a tree.
///
/// `Product(children)` applies `children[0]` first, so `Product([T1, T2])`
/// is `T2 ∘ T1`.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorExpr {
    Identity,
    Projection(ConvexSet),
    SubgradProjector(ConvexFunction),
    /// Projection onto the member of the family furthest from the input.
    FurthestProjection(SetFamily),
    Relaxation {
        child: Box<OperatorExpr>,
        lambda: f64,
    },
    ConvexCombination {
        children: Vec<OperatorExpr>,
        weights: Vec<f64>,
    },
    Product(Vec<OperatorExpr>),
}

impl OperatorExpr {
    pub fn identity() -> Self {
        Self::Identity
    }

    pub fn projection(set: ConvexSet) -> Self {
        Self::Projection(set)
    }

    pub fn subgradient_projection(f: ConvexFunction) -> Self {
        Self::SubgradProjector(f)
    }

    pub fn furthest_projection(family: SetFamily) -> Self {
        Self::FurthestProjection(family)
    }

    /// `T_λ = Id + λ(T - Id)`. Accepts `λ ∈ (0, 2]`; values above 1 need a
    /// cutter child.
    pub fn relaxation(child: OperatorExpr, lambda: f64) -> Result<Self, OperatorError> {
        if !(lambda > 0.0 && lambda <= 2.0) {
            return Err(OperatorError::InvalidRelaxation { lambda });
        }
        if lambda > 1.0 && !child.certificate()?.is_cutter {
            return Err(OperatorError::RelaxationRequiresCutter { lambda });
        }
        Ok(Self::Relaxation {
            child: Box::new(child),
            lambda,
        })
    }

    /// `Σ ω_i U_i` with nonnegative weights summing to 1.
    pub fn convex_combination(children: Vec<OperatorExpr>, weights: Vec<f64>) -> Result<Self, OperatorError> {
        if children.is_empty() {
            return Err(OperatorError::NoChildren("convex combination"));
        }
        if children.len() != weights.len() {
            return Err(OperatorError::InvalidWeights(format!(
                "{} children but {} weights",
                children.len(),
                weights.len()
            )));
        }
        check_weights(&weights)?;
        common_dim(&children)?;
        Ok(Self::ConvexCombination { children, weights })
    }

    /// `U_m ∘ ... ∘ U_1` from `[U_1, ..., U_m]`.
    pub fn product(children: Vec<OperatorExpr>) -> Result<Self, OperatorError> {
        if children.is_empty() {
            return Err(OperatorError::NoChildren("product"));
        }
        common_dim(&children)?;
        Ok(Self::Product(children))
    }

    /// Ambient dimension, `None` for a tree built only from identities.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Identity => None,
            Self::Projection(set) => Some(set.dim()),
            Self::SubgradProjector(f) => Some(f.dim()),
            Self::FurthestProjection(family) => Some(family.dim()),
            Self::Relaxation { child, .. } => child.dim(),
            Self::ConvexCombination { children, .. } | Self::Product(children) => {
                children.iter().find_map(|c| c.dim())
            }
        }
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector, OperatorError> {
        self.check_dim(x)?;
        self.eval(x)
    }

    pub(crate) fn check_dim(&self, x: &Vector) -> Result<(), OperatorError> {
        match self.dim() {
            Some(dim) if dim != x.dim() => Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: x.dim(),
            }
            .into()),
            _ => Ok(()),
        }
    }

    /// Like [`apply`](Self::apply), also returning every prefix of a
    /// top-level product: `Q_0 x = x, Q_1 x = U_1 x, ...`. For any other
    /// node the result is `[x, U x]`.
    pub fn apply_with_prefixes(&self, x: &Vector) -> Result<Vec<Vector>, OperatorError> {
        self.check_dim(x)?;
        match self {
            Self::Product(children) => {
                let mut out = Vec::with_capacity(children.len() + 1);
                out.push(x.clone());
                for child in children {
                    let next = child.eval(out.last().expect("nonempty"))?;
                    out.push(next);
                }
                Ok(out)
            }
            _ => Ok(vec![x.clone(), self.eval(x)?]),
        }
    }

    pub(crate) fn eval(&self, x: &Vector) -> Result<Vector, OperatorError> {
        Ok(match self {
            Self::Identity => x.clone(),
            Self::Projection(set) => set.project_unchecked(x),
            Self::SubgradProjector(f) => f.project(x)?,
            Self::FurthestProjection(family) => {
                let i = family.furthest_set_index(x)?;
                family.sets()[i].project_unchecked(x)
            }
            Self::Relaxation { child, lambda } => {
                let y = child.eval(x)?;
                if *lambda == 1.0 {
                    y
                } else {
                    x.axpy(*lambda, &(&y - x))
                }
            }
            Self::ConvexCombination { children, weights } => {
                let mut acc = Vector::zeros(x.dim());
                for (child, &w) in children.iter().zip(weights) {
                    if w != 0.0 {
                        acc = acc.axpy(w, &child.eval(x)?);
                    }
                }
                acc
            }
            Self::Product(children) => {
                let mut y = x.clone();
                for child in children {
                    y = child.eval(&y)?;
                }
                y
            }
        })
    }

    /// `||U x - x||`.
    pub fn residual(&self, x: &Vector) -> Result<f64, OperatorError> {
        Ok(self.apply(x)?.distance(x))
    }
}

fn check_weights(weights: &[f64]) -> Result<(), OperatorError> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(OperatorError::InvalidWeights(format!(
            "weight {w} is negative or not finite"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(OperatorError::InvalidWeights(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

fn common_dim(children: &[OperatorExpr]) -> Result<Option<usize>, OperatorError> {
    let mut dim = None;
    for child in children {
        if let Some(d) = child.dim() {
            match dim {
                None => dim = Some(d),
                Some(expected) if expected != d => {
                    return Err(GeometryError::DimensionMismatch { expected, found: d }.into())
                }
                _ => {}
            }
        }
    }
    Ok(dim)
}
