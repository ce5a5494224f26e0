use crate::geometry::{ConvexSet, SetFamily, Vector, WITNESS_TOL};

use super::OperatorError;

/// Pieces within this of the maximum are active when picking a subgradient.
pub const ACTIVE_TOL: f64 = 1e-12;
/// A subgradient shorter than this at a point with `f(x) > 0` means the
/// function is not convex with a nonempty sublevel set.
pub const ZERO_SUBGRADIENT: f64 = 1e-14;

/// One affine piece `x ↦ <a, x> - b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub normal: Vector,
    pub offset: f64,
}

impl AffinePiece {
    pub fn new(normal: Vector, offset: f64) -> Self {
        Self { normal, offset }
    }

    fn value(&self, x: &Vector) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    /// `f(x) = max_i (<a_i, x> - b_i)`.
    AffineMax(Vec<AffinePiece>),
    /// `f(x) = max_i d(x, C_i)`.
    DistanceMax(SetFamily),
}

/// A continuous convex function with a fixed subgradient selection and a
/// point certifying `S(f, 0) = {x : f(x) <= 0}` is nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFunction {
    kind: FunctionKind,
    feasible_point: Vector,
}

impl ConvexFunction {
    pub fn affine_max(pieces: Vec<AffinePiece>, feasible_point: Vector) -> Result<Self, OperatorError> {
        let dim = feasible_point.dim();
        if pieces.is_empty() {
            return Err(OperatorError::InvalidFunction("affine max needs at least one piece".into()));
        }
        if let Some(p) = pieces.iter().find(|p| p.normal.dim() != dim) {
            return Err(crate::geometry::GeometryError::DimensionMismatch {
                expected: dim,
                found: p.normal.dim(),
            }
            .into());
        }
        if !pieces.iter().all(|p| p.offset.is_finite()) {
            return Err(OperatorError::InvalidFunction("piece offsets must be finite".into()));
        }
        Self::checked(FunctionKind::AffineMax(pieces), feasible_point)
    }

    /// `max_i d(x, C_i)`; the feasible point defaults to the family witness.
    pub fn distance_max(family: SetFamily, feasible_point: Option<Vector>) -> Result<Self, OperatorError> {
        let point = feasible_point
            .or_else(|| family.witness().cloned())
            .ok_or_else(|| {
                OperatorError::InvalidFunction("distance max needs a feasible point or family witness".into())
            })?;
        if point.dim() != family.dim() {
            return Err(crate::geometry::GeometryError::DimensionMismatch {
                expected: family.dim(),
                found: point.dim(),
            }
            .into());
        }
        Self::checked(FunctionKind::DistanceMax(family), point)
    }

    fn checked(kind: FunctionKind, feasible_point: Vector) -> Result<Self, OperatorError> {
        let f = Self { kind, feasible_point };
        let value = f.value_unchecked(&f.feasible_point);
        if value > WITNESS_TOL {
            return Err(OperatorError::InfeasibleFunction { value });
        }
        Ok(f)
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn feasible_point(&self) -> &Vector {
        &self.feasible_point
    }

    pub fn dim(&self) -> usize {
        self.feasible_point.dim()
    }

    fn check_dim(&self, x: &Vector) -> Result<(), OperatorError> {
        if x.dim() != self.dim() {
            return Err(crate::geometry::GeometryError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            }
            .into());
        }
        Ok(())
    }

    pub fn value(&self, x: &Vector) -> Result<f64, OperatorError> {
        self.check_dim(x)?;
        Ok(self.value_unchecked(x))
    }

    fn value_unchecked(&self, x: &Vector) -> f64 {
        match &self.kind {
            FunctionKind::AffineMax(pieces) => pieces
                .iter()
                .map(|p| p.value(x))
                .fold(f64::NEG_INFINITY, f64::max),
            FunctionKind::DistanceMax(family) => family
                .sets()
                .iter()
                .map(|s| s.distance_unchecked(x))
                .fold(0.0, f64::max),
        }
    }

    /// `f_+(x) = max(f(x), 0)`.
    pub fn positive_part(&self, x: &Vector) -> Result<f64, OperatorError> {
        Ok(self.value(x)?.max(0.0))
    }

    /// The fixed subgradient `g_f(x)`.
    ///
    /// Affine max: gradient of the lowest-index active piece. Distance max:
    /// `(x - P x) / d(x, C_i)` for the furthest set `C_i`, or zero when `x`
    /// lies in every set.
    pub fn subgradient(&self, x: &Vector) -> Result<Vector, OperatorError> {
        self.check_dim(x)?;
        Ok(match &self.kind {
            FunctionKind::AffineMax(pieces) => {
                let values: Vec<f64> = pieces.iter().map(|p| p.value(x)).collect();
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let i = values
                    .iter()
                    .position(|&v| v >= max - ACTIVE_TOL)
                    .expect("nonempty pieces");
                pieces[i].normal.clone()
            }
            FunctionKind::DistanceMax(family) => {
                let i = family.furthest_set_index(x)?;
                let p = family.sets()[i].project_unchecked(x);
                let d = x.distance(&p);
                if d > 0.0 {
                    (x - &p).scaled(1.0 / d)
                } else {
                    Vector::zeros(x.dim())
                }
            }
        })
    }

    /// Subgradient projection `P_f x = x - f_+(x) g / ||g||^2`.
    pub fn project(&self, x: &Vector) -> Result<Vector, OperatorError> {
        let value = self.value(x)?;
        if value <= 0.0 {
            return Ok(x.clone());
        }
        let g = self.subgradient(x)?;
        let g_sq = g.norm_sq();
        if g_sq.sqrt() <= ZERO_SUBGRADIENT {
            return Err(OperatorError::InconsistentFunction { value });
        }
        Ok(x.axpy(-value / g_sq, &g))
    }

    /// `S(f, 0)` as a family of sets: the half-spaces of the nonconstant
    /// pieces, or the underlying family. `None` when the sublevel set is the
    /// whole space.
    pub fn sublevel_family(&self) -> Option<SetFamily> {
        match &self.kind {
            FunctionKind::AffineMax(pieces) => {
                let sets: Vec<ConvexSet> = pieces
                    .iter()
                    .filter_map(|p| ConvexSet::half_space(p.normal.clone(), p.offset).ok())
                    .collect();
                if sets.is_empty() {
                    return None;
                }
                SetFamily::new(sets.clone(), Some(self.feasible_point.clone()))
                    .or_else(|_| SetFamily::new(sets, None))
                    .ok()
            }
            FunctionKind::DistanceMax(family) => Some(family.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::BallSampler;

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c).unwrap()
    }

    fn two_sided() -> ConvexFunction {
        ConvexFunction::affine_max(
            vec![
                AffinePiece::new(v(&[1.0, 0.0]), 1.0),
                AffinePiece::new(v(&[-1.0, 0.0]), 1.0),
            ],
            v(&[0.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn affine_max_subgradient_projection() {
        let f = two_sided();
        let x = v(&[2.0, 0.0]);
        assert_eq!(f.value(&x).unwrap(), 1.0);
        assert_eq!(f.subgradient(&x).unwrap(), v(&[1.0, 0.0]));
        assert_eq!(f.project(&x).unwrap(), v(&[1.0, 0.0]));
        assert_eq!(f.project(&v(&[0.5, 3.0])).unwrap(), v(&[0.5, 3.0]));
    }

    #[test]
    fn tie_picks_lowest_piece() {
        let f = ConvexFunction::affine_max(
            vec![
                AffinePiece::new(v(&[1.0, 0.0]), 0.0),
                AffinePiece::new(v(&[0.0, 1.0]), 0.0),
            ],
            v(&[-1.0, -1.0]),
        )
        .unwrap();
        assert_eq!(f.subgradient(&v(&[1.0, 1.0])).unwrap(), v(&[1.0, 0.0]));
    }

    #[test]
    fn infeasible_point_rejected() {
        let err = ConvexFunction::affine_max(vec![AffinePiece::new(v(&[1.0]), -1.0)], v(&[0.0])).unwrap_err();
        assert!(matches!(err, OperatorError::InfeasibleFunction { .. }));
        let f = ConvexFunction::affine_max(
            vec![
                AffinePiece::new(v(&[0.0]), 0.0),
                AffinePiece::new(v(&[1.0]), 0.0),
            ],
            v(&[-1.0]),
        )
        .unwrap();
        assert!(f.project(&v(&[2.0])).is_ok());
    }

    #[test]
    fn distance_max_subgradient_is_unit_normal() {
        let family = SetFamily::new(
            vec![
                ConvexSet::half_space(v(&[1.0, 0.0]), 0.0).unwrap(),
                ConvexSet::ball(v(&[0.0, 0.0]), 2.0).unwrap(),
            ],
            Some(v(&[0.0, 0.0])),
        )
        .unwrap();
        let f = ConvexFunction::distance_max(family, None).unwrap();
        let g = f.subgradient(&v(&[3.0, 0.5])).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-15);
        assert_eq!(f.subgradient(&v(&[-0.5, 0.0])).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn subgradient_inequality_holds_on_samples() {
        let family = SetFamily::new(
            vec![
                ConvexSet::half_space(v(&[1.0, 2.0, 0.0]), 1.0).unwrap(),
                ConvexSet::ball(v(&[0.0, 0.0, 0.5]), 2.0).unwrap(),
                ConvexSet::bounding_box(v(&[-1.0, -1.0, -1.0]), v(&[1.0, 1.0, 1.0])).unwrap(),
            ],
            Some(v(&[0.0, 0.0, 0.0])),
        )
        .unwrap();
        let functions = [
            ConvexFunction::distance_max(family, None).unwrap(),
            ConvexFunction::affine_max(
                vec![
                    AffinePiece::new(v(&[1.0, -1.0, 0.5]), 1.0),
                    AffinePiece::new(v(&[-2.0, 0.0, 1.0]), 0.5),
                    AffinePiece::new(v(&[0.0, 3.0, -1.0]), 2.0),
                ],
                v(&[0.0, 0.0, 0.0]),
            )
            .unwrap(),
        ];
        let c = v(&[0.0, 0.0, 0.0]);
        for f in &functions {
            let xs = BallSampler::new(c.clone(), 6.0, 21).take(1000);
            let ys = BallSampler::new(c.clone(), 6.0, 22).take(1000);
            for (x, y) in xs.zip(ys) {
                let g = f.subgradient(&x).unwrap();
                let lhs = f.value(&y).unwrap();
                let rhs = f.value(&x).unwrap() + g.dot(&(&y - &x));
                assert!(lhs >= rhs - 1e-10, "{lhs} < {rhs}");
            }
        }
    }
}
