use serde::{Deserialize, Serialize};

use super::{GeometryError, Vector};

/// Concrete shape of a [`ConvexSet`].
///
/// Half-spaces are `{x : <a, x> <= b}`, hyperplanes `{x : <a, x> = b}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    HalfSpace { normal: Vector, offset: f64 },
    Hyperplane { normal: Vector, offset: f64 },
    Ball { center: Vector, radius: f64 },
    Box { lower: Vector, upper: Vector },
}

/// A closed convex set with an exact metric projection.
///
/// Only constructible through the validating constructors (or
/// `TryFrom<Shape>`), so a live value always has a nonzero normal, a
/// nonnegative radius, or an ordered box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetRecord", into = "SetRecord")]
pub struct ConvexSet {
    shape: Shape,
}

impl ConvexSet {
    pub fn half_space(normal: Vector, offset: f64) -> Result<Self, GeometryError> {
        Self::try_from(Shape::HalfSpace { normal, offset })
    }

    pub fn hyperplane(normal: Vector, offset: f64) -> Result<Self, GeometryError> {
        Self::try_from(Shape::Hyperplane { normal, offset })
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self, GeometryError> {
        Self::try_from(Shape::Ball { center, radius })
    }

    pub fn bounding_box(lower: Vector, upper: Vector) -> Result<Self, GeometryError> {
        Self::try_from(Shape::Box { lower, upper })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::HalfSpace { normal, .. } | Shape::Hyperplane { normal, .. } => normal.dim(),
            Shape::Ball { center, .. } => center.dim(),
            Shape::Box { lower, .. } => lower.dim(),
        }
    }

    fn check_dim(&self, x: &Vector) -> Result<(), GeometryError> {
        if x.dim() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(())
    }

    /// Metric projection `P_C x`.
    pub fn project(&self, x: &Vector) -> Result<Vector, GeometryError> {
        self.check_dim(x)?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &Vector) -> Vector {
        match &self.shape {
            Shape::HalfSpace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x.axpy(-excess / normal.norm_sq(), normal)
                }
            }
            Shape::Hyperplane { normal, offset } => {
                let excess = normal.dot(x) - offset;
                x.axpy(-excess / normal.norm_sq(), normal)
            }
            Shape::Ball { center, radius } => {
                let offset = x - center;
                let r = offset.norm();
                if r <= *radius {
                    x.clone()
                } else {
                    center.axpy(radius / r, &offset)
                }
            }
            Shape::Box { lower, upper } => Vector::from_raw(
                x.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
                    .collect(),
            ),
        }
    }

    /// `d(x, C) = ||x - P_C x||`.
    pub fn distance(&self, x: &Vector) -> Result<f64, GeometryError> {
        self.check_dim(x)?;
        Ok(self.distance_unchecked(x))
    }

    pub(crate) fn distance_unchecked(&self, x: &Vector) -> f64 {
        x.distance(&self.project_unchecked(x))
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool, GeometryError> {
        Ok(self.distance(x)? <= tol)
    }
}

impl TryFrom<Shape> for ConvexSet {
    type Error = GeometryError;

    fn try_from(shape: Shape) -> Result<Self, Self::Error> {
        match &shape {
            Shape::HalfSpace { normal, offset } | Shape::Hyperplane { normal, offset } => {
                if normal.norm_sq() <= 0.0 {
                    return Err(GeometryError::DegenerateNormal);
                }
                if !offset.is_finite() {
                    return Err(GeometryError::InvalidArgument(
                        "offset must be finite".into(),
                    ));
                }
            }
            Shape::Ball { radius, .. } => {
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(GeometryError::NegativeRadius(*radius));
                }
            }
            Shape::Box { lower, upper } => {
                if lower.dim() != upper.dim() {
                    return Err(GeometryError::DimensionMismatch {
                        expected: lower.dim(),
                        found: upper.dim(),
                    });
                }
                if let Some(index) = lower.iter().zip(upper.iter()).position(|(l, u)| l > u) {
                    return Err(GeometryError::InvertedBox { index });
                }
            }
        }
        Ok(Self { shape })
    }
}

/// Wire form: `{"type":"halfspace","a":[...],"b":0.0}` and friends.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum SetRecord {
    Halfspace { a: Vector, b: f64 },
    Hyperplane { a: Vector, b: f64 },
    Ball { center: Vector, radius: f64 },
    Box { lower: Vector, upper: Vector },
}

impl TryFrom<SetRecord> for ConvexSet {
    type Error = GeometryError;

    fn try_from(record: SetRecord) -> Result<Self, Self::Error> {
        let shape = match record {
            SetRecord::Halfspace { a, b } => Shape::HalfSpace {
                normal: a,
                offset: b,
            },
            SetRecord::Hyperplane { a, b } => Shape::Hyperplane {
                normal: a,
                offset: b,
            },
            SetRecord::Ball { center, radius } => Shape::Ball { center, radius },
            SetRecord::Box { lower, upper } => Shape::Box { lower, upper },
        };
        ConvexSet::try_from(shape)
    }
}

impl From<ConvexSet> for SetRecord {
    fn from(set: ConvexSet) -> Self {
        match set.shape {
            Shape::HalfSpace { normal, offset } => SetRecord::Halfspace {
                a: normal,
                b: offset,
            },
            Shape::Hyperplane { normal, offset } => SetRecord::Hyperplane {
                a: normal,
                b: offset,
            },
            Shape::Ball { center, radius } => SetRecord::Ball { center, radius },
            Shape::Box { lower, upper } => SetRecord::Box { lower, upper },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c).unwrap()
    }

    #[test]
    fn half_space_projection() {
        let h = ConvexSet::half_space(v(&[1.0, 0.0]), 0.0).unwrap();
        assert_eq!(h.project(&v(&[2.0, 3.0])).unwrap(), v(&[0.0, 3.0]));
        let h = ConvexSet::half_space(v(&[0.0, 1.0]), 0.0).unwrap();
        assert_eq!(h.distance(&v(&[7.0, 3.0])).unwrap(), 3.0);
        assert_eq!(h.distance(&v(&[7.0, -3.0])).unwrap(), 0.0);
    }

    #[test]
    fn ball_projection() {
        let b = ConvexSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(b.project(&v(&[0.3, 0.4])).unwrap(), v(&[0.3, 0.4]));
        assert_eq!(b.project(&v(&[2.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
    }

    #[test]
    fn box_distance() {
        let b = ConvexSet::bounding_box(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap();
        assert!((b.distance(&v(&[2.0, 2.0])).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.distance(&v(&[0.5, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn hyperplane_projects_from_both_sides() {
        let h = ConvexSet::hyperplane(v(&[0.0, 2.0]), 2.0).unwrap();
        assert_eq!(h.project(&v(&[3.0, 5.0])).unwrap(), v(&[3.0, 1.0]));
        assert_eq!(h.project(&v(&[3.0, -5.0])).unwrap(), v(&[3.0, 1.0]));
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(matches!(
            ConvexSet::half_space(v(&[0.0, 0.0]), 1.0),
            Err(GeometryError::DegenerateNormal)
        ));
        assert!(matches!(
            ConvexSet::ball(v(&[0.0]), -1.0),
            Err(GeometryError::NegativeRadius(_))
        ));
        assert!(matches!(
            ConvexSet::bounding_box(v(&[0.0, 2.0]), v(&[1.0, 1.0])),
            Err(GeometryError::InvertedBox { index: 1 })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let b = ConvexSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert!(matches!(
            b.project(&v(&[1.0, 2.0, 3.0])),
            Err(GeometryError::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn wire_format() {
        let h: ConvexSet = serde_json::from_str(r#"{"type":"halfspace","a":[1.0,0.0],"b":0.0}"#).unwrap();
        assert_eq!(h, ConvexSet::half_space(v(&[1.0, 0.0]), 0.0).unwrap());
        let back = serde_json::to_string(&h).unwrap();
        assert_eq!(back, r#"{"type":"halfspace","a":[1.0,0.0],"b":0.0}"#);
        assert!(serde_json::from_str::<ConvexSet>(r#"{"type":"halfspace","a":[0.0],"b":0.0}"#).is_err());
        assert!(serde_json::from_str::<ConvexSet>(r#"{"type":"ball","center":[0.0],"radius":1.0,"extra":1}"#).is_err());
    }
}
