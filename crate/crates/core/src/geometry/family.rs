use serde::Serialize;

use super::{ConvexSet, GeometryError, Vector};
use crate::sampling::BallSampler;

/// Witness membership tolerance.
pub const WITNESS_TOL: f64 = 1e-10;
/// Samples whose largest member distance falls below this are skipped by
/// [`SetFamily::estimate_modulus`].
pub const RATIO_SKIP: f64 = 1e-9;
/// Distances within this of the maximum count as tied in
/// [`SetFamily::furthest_set_index`].
pub const TIE_TOL: f64 = 1e-12;
/// Default cycle budget for the Dykstra oracle.
pub const DEFAULT_DYKSTRA_CYCLES: usize = 200_000;
/// Tolerance used when the oracle is invoked implicitly (modulus
/// estimation, trace channels).
pub const ORACLE_TOL: f64 = 1e-12;

/// An ordered, nonempty family of closed convex sets `C_1, ..., C_m` in a
/// common dimension, optionally with a point known to lie in every member.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFamily {
    sets: Vec<ConvexSet>,
    witness: Option<Vector>,
}

/// Lower-bound estimate of the linear-regularity modulus of a family over a
/// ball. Sampling can only see ratios that occur, so `kappa_hat` never
/// exceeds the true minimal modulus on that ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyRegularityEstimate {
    pub kappa_hat: f64,
    pub region_center: Vector,
    pub region_radius: f64,
    pub sample_count: usize,
    pub skipped: usize,
    pub seed: u64,
}

impl SetFamily {
    pub fn new(sets: Vec<ConvexSet>, witness: Option<Vector>) -> Result<Self, GeometryError> {
        let first = sets.first().ok_or(GeometryError::EmptyFamily)?;
        let dim = first.dim();
        if let Some(bad) = sets.iter().find(|s| s.dim() != dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        if let Some(w) = &witness {
            if w.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    found: w.dim(),
                });
            }
            for (index, set) in sets.iter().enumerate() {
                let distance = set.distance_unchecked(w);
                if distance > WITNESS_TOL {
                    return Err(GeometryError::WitnessOutside { set: index, distance });
                }
            }
        }
        Ok(Self { sets, witness })
    }

    pub fn single(set: ConvexSet) -> Self {
        Self {
            sets: vec![set],
            witness: None,
        }
    }

    pub fn sets(&self) -> &[ConvexSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sets[0].dim()
    }

    pub fn witness(&self) -> Option<&Vector> {
        self.witness.as_ref()
    }

    /// Concatenates two families (the intersection of the union).
    pub fn union(&self, other: &SetFamily) -> Result<SetFamily, GeometryError> {
        let mut sets = self.sets.clone();
        sets.extend(other.sets.iter().cloned());
        let witness = match (&self.witness, &other.witness) {
            (Some(w), _) if other.sets.iter().all(|s| s.distance_unchecked(w) <= WITNESS_TOL) => {
                Some(w.clone())
            }
            (_, Some(w)) if self.sets.iter().all(|s| s.distance_unchecked(w) <= WITNESS_TOL) => {
                Some(w.clone())
            }
            _ => None,
        };
        SetFamily::new(sets, witness)
    }

    /// Same sets, new witness (validated).
    pub fn with_witness(&self, witness: Vector) -> Result<SetFamily, GeometryError> {
        SetFamily::new(self.sets.clone(), Some(witness))
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

    /// Largest member distance `max_i d(x, C_i)`.
    pub fn max_member_distance(&self, x: &Vector) -> Result<f64, GeometryError> {
        self.check_dim(x)?;
        Ok(self
            .sets
            .iter()
            .map(|s| s.distance_unchecked(x))
            .fold(0.0, f64::max))
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool, GeometryError> {
        Ok(self.max_member_distance(x)? <= tol)
    }

    /// Projection onto `C = ⋂ C_i` by Dykstra's cyclic correction scheme.
    ///
    /// Each cycle projects `y + p_i` onto `C_i` and updates the correction
    /// `p_i`. The run stops once the summed movement of the iterate over a
    /// full cycle is at most `tol * max(1, ||x||)`; zero movement over a cycle
    /// certifies `y = P_C x` exactly, since then `x - y` is a sum of normal
    /// vectors at `y`. `max_iter` counts cycles.
    pub fn dykstra_project(
        &self,
        x: &Vector,
        tol: f64,
        max_iter: usize,
    ) -> Result<Vector, GeometryError> {
        self.check_dim(x)?;
        if !(tol > 0.0) {
            return Err(GeometryError::InvalidArgument(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        if self.sets.len() == 1 {
            return Ok(self.sets[0].project_unchecked(x));
        }
        let threshold = tol * x.norm().max(1.0);
        let mut y = x.clone();
        let mut corrections = vec![Vector::zeros(x.dim()); self.sets.len()];
        for _ in 0..max_iter {
            let mut moved = 0.0;
            for (set, correction) in self.sets.iter().zip(corrections.iter_mut()) {
                let shifted = &y + correction;
                let next = set.project_unchecked(&shifted);
                *correction = &shifted - &next;
                moved += next.distance(&y);
                y = next;
            }
            if moved <= threshold {
                return Ok(y);
            }
        }
        Err(GeometryError::NonConvergence {
            iterations: max_iter,
            last: y,
        })
    }

    /// `d(x, C)` through the Dykstra oracle.
    pub fn distance_intersection(&self, x: &Vector, tol: f64) -> Result<f64, GeometryError> {
        let p = self.dykstra_project(x, tol, DEFAULT_DYKSTRA_CYCLES)?;
        Ok(x.distance(&p))
    }

    /// Index of the furthest member; ties (within [`TIE_TOL`]) go to the
    /// smallest index. Indices are 0-based.
    pub fn furthest_set_index(&self, x: &Vector) -> Result<usize, GeometryError> {
        self.check_dim(x)?;
        let distances: Vec<f64> = self.sets.iter().map(|s| s.distance_unchecked(x)).collect();
        let max = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(distances
            .iter()
            .position(|&d| d >= max - TIE_TOL)
            .expect("nonempty family"))
    }

    /// Samples `n` uniform points in `B(center, radius)` and returns the
    /// largest ratio `d(x, C) / max_i d(x, C_i)`, floored at 1.
    ///
    /// This is a lower bound on the minimal linear-regularity modulus over
    /// the ball. Samples with `max_i d(x, C_i) < 1e-9` are skipped.
    pub fn estimate_modulus(
        &self,
        center: &Vector,
        radius: f64,
        n: usize,
        seed: u64,
    ) -> Result<FamilyRegularityEstimate, GeometryError> {
        self.check_dim(center)?;
        if !(radius > 0.0) || n == 0 {
            return Err(GeometryError::InvalidArgument(
                "modulus estimation needs radius > 0 and n >= 1".into(),
            ));
        }
        let mut kappa: Option<f64> = None;
        let mut skipped = 0;
        for x in BallSampler::new(center.clone(), radius, seed).take(n) {
            let max_member = self.max_member_distance(&x)?;
            if max_member < RATIO_SKIP {
                skipped += 1;
                continue;
            }
            let ratio = self.distance_intersection(&x, ORACLE_TOL)? / max_member;
            kappa = Some(kappa.map_or(ratio, |k: f64| k.max(ratio)));
        }
        let kappa = kappa.ok_or(GeometryError::DegenerateSample { samples: n })?;
        Ok(FamilyRegularityEstimate {
            kappa_hat: kappa.max(1.0),
            region_center: center.clone(),
            region_radius: radius,
            sample_count: n,
            skipped,
            seed,
        })
    }

    /// `n` points of `C` obtained by projecting seeded ball samples with the
    /// Dykstra oracle.
    pub fn sample_members(
        &self,
        n: usize,
        center: &Vector,
        radius: f64,
        seed: u64,
        tol: f64,
    ) -> Result<Vec<Vector>, GeometryError> {
        self.check_dim(center)?;
        BallSampler::new(center.clone(), radius, seed)
            .take(n)
            .map(|x| self.dykstra_project(&x, tol, DEFAULT_DYKSTRA_CYCLES))
            .collect()
    }
}
