use serde::Serialize;

use crate::geometry::{ConvexSet, SetFamily, Vector};

use super::{ConvexFunction, OperatorError, OperatorExpr};

/// Structural constant `ρ` with `||Tu - z||² <= ||u - z||² - ρ||Tu - u||²`
/// for every `z ∈ Fix T`. `ρ = 0` means only quasi-nonexpansive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqneCertificate {
    pub rho: f64,
    pub is_cutter: bool,
    /// One line per rule applied, leaves first.
    pub derivation: Vec<String>,
}

impl SqneCertificate {
    fn leaf(what: &str) -> Self {
        Self {
            rho: 1.0,
            is_cutter: true,
            derivation: vec![format!("{what}: cutter, rho = 1")],
        }
    }

    fn with(rho: f64, mut derivation: Vec<String>, line: String) -> Self {
        derivation.push(line);
        Self {
            rho,
            is_cutter: rho >= 1.0,
            derivation,
        }
    }
}

/// Explicit description of `Fix U` as an intersection of sets and
/// sublevel sets `{f <= 0}`. Empty lists mean the whole space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixedPointSet {
    pub sets: Vec<ConvexSet>,
    pub sublevels: Vec<ConvexFunction>,
}

impl FixedPointSet {
    pub fn is_whole_space(&self) -> bool {
        self.sets.is_empty() && self.sublevels.is_empty()
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool, OperatorError> {
        for set in &self.sets {
            if set.distance(x)? > tol {
                return Ok(false);
            }
        }
        for f in &self.sublevels {
            if f.value(x)? > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The same intersection as a [`SetFamily`], sublevel sets of affine
    /// maxima becoming half-spaces.
    pub fn to_family(&self) -> Result<SetFamily, OperatorError> {
        let mut sets = self.sets.clone();
        let mut witness = None;
        for f in &self.sublevels {
            if let Some(family) = f.sublevel_family() {
                sets.extend(family.sets().iter().cloned());
            }
            witness.get_or_insert_with(|| f.feasible_point().clone());
        }
        if sets.is_empty() {
            return Err(OperatorError::WholeSpace);
        }
        Ok(SetFamily::new(sets.clone(), witness).or_else(|_| SetFamily::new(sets, None))?)
    }

    fn extend(&mut self, other: FixedPointSet) {
        self.sets.extend(other.sets);
        self.sublevels.extend(other.sublevels);
    }
}

impl OperatorExpr {
    /// Compose the SQNE constant bottom-up.
    ///
    /// Leaves are cutters. A `λ`-relaxation of a cutter is `(2-λ)/λ`-SQNE;
    /// of any other QNE operator with `λ <= 1`, `(1-λ)/λ`-SQNE; `λ = 1`
    /// keeps the child's constant. Convex combinations take the minimum
    /// (all weights and child constants positive), products of `m` factors
    /// take `min / m`.
    pub fn certificate(&self) -> Result<SqneCertificate, OperatorError> {
        Ok(match self {
            Self::Identity => SqneCertificate::leaf("identity"),
            Self::Projection(_) => SqneCertificate::leaf("metric projection"),
            Self::SubgradProjector(_) => SqneCertificate::leaf("subgradient projection"),
            Self::FurthestProjection(_) => SqneCertificate::leaf("furthest-set projection"),
            Self::Relaxation { child, lambda } => {
                let c = child.certificate()?;
                let lambda = *lambda;
                if lambda == 1.0 {
                    let rho = c.rho;
                    let line = format!("relaxation lambda = 1: rho = {rho}");
                    SqneCertificate::with(rho, c.derivation, line)
                } else if c.is_cutter {
                    let rho = (2.0 - lambda) / lambda;
                    let line = format!("relaxation lambda = {lambda} of cutter: rho = (2 - lambda)/lambda = {rho}");
                    SqneCertificate::with(rho, c.derivation, line)
                } else if lambda < 1.0 {
                    let rho = (1.0 - lambda) / lambda;
                    let line = format!(
                        "relaxation lambda = {lambda} of QNE operator: rho = (1 - lambda)/lambda = {rho}"
                    );
                    SqneCertificate::with(rho, c.derivation, line)
                } else {
                    return Err(OperatorError::RelaxationRequiresCutter { lambda });
                }
            }
            Self::ConvexCombination { children, weights } => {
                let mut derivation = Vec::new();
                let mut rho = f64::INFINITY;
                for (i, (child, &w)) in children.iter().zip(weights).enumerate() {
                    if w <= 0.0 {
                        return Err(OperatorError::CertificateUnavailable {
                            child: i,
                            reason: "has zero weight".into(),
                        });
                    }
                    let c = child.certificate()?;
                    if c.rho <= 0.0 {
                        return Err(OperatorError::CertificateUnavailable {
                            child: i,
                            reason: "is only quasi-nonexpansive".into(),
                        });
                    }
                    rho = rho.min(c.rho);
                    derivation.extend(c.derivation);
                }
                let line = format!("convex combination of {}: rho = min = {rho}", children.len());
                SqneCertificate::with(rho, derivation, line)
            }
            Self::Product(children) => {
                let mut derivation = Vec::new();
                let mut min = f64::INFINITY;
                for child in children {
                    let c = child.certificate()?;
                    min = min.min(c.rho);
                    derivation.extend(c.derivation);
                }
                let m = children.len();
                let rho = min / m as f64;
                let line = format!("product of {m}: rho = min/m = {rho}");
                SqneCertificate::with(rho, derivation, line)
            }
        })
    }

    /// `Fix U` written out from the leaves. Combinations and products need
    /// a positive certificate for `Fix U = ⋂ Fix U_i`.
    pub fn fixed_point_superset(&self) -> Result<FixedPointSet, OperatorError> {
        Ok(match self {
            Self::Identity => FixedPointSet::default(),
            Self::Projection(set) => FixedPointSet {
                sets: vec![set.clone()],
                sublevels: vec![],
            },
            Self::SubgradProjector(f) => FixedPointSet {
                sets: vec![],
                sublevels: vec![f.clone()],
            },
            Self::FurthestProjection(family) => FixedPointSet {
                sets: family.sets().to_vec(),
                sublevels: vec![],
            },
            Self::Relaxation { child, .. } => child.fixed_point_superset()?,
            Self::ConvexCombination { children, .. } | Self::Product(children) => {
                let c = self
                    .certificate()
                    .map_err(|e| OperatorError::IdentityNotGuaranteed(e.to_string()))?;
                if c.rho <= 0.0 {
                    return Err(OperatorError::IdentityNotGuaranteed(
                        "a factor is only quasi-nonexpansive".into(),
                    ));
                }
                let mut out = FixedPointSet::default();
                for child in children {
                    out.extend(child.fixed_point_superset()?);
                }
                out
            }
        })
    }
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

    #[test]
    fn relaxed_cutter_constants() {
        let p = proj(&[1.0, 0.0], 0.0);
        let c = OperatorExpr::relaxation(p.clone(), 0.5).unwrap().certificate().unwrap();
        assert_eq!(c.rho, 3.0);
        assert!(c.is_cutter);
        let c = OperatorExpr::relaxation(p.clone(), 1.5).unwrap().certificate().unwrap();
        assert!((c.rho - 1.0 / 3.0).abs() < 1e-15);
        assert!(!c.is_cutter);
        let c = OperatorExpr::relaxation(p, 2.0).unwrap().certificate().unwrap();
        assert_eq!(c.rho, 0.0);
    }

    #[test]
    fn relaxation_of_non_cutter() {
        let p = proj(&[1.0, 0.0], 0.0);
        let r = OperatorExpr::relaxation(p, 1.5).unwrap();
        let c = OperatorExpr::relaxation(r.clone(), 0.5).unwrap().certificate().unwrap();
        assert_eq!(c.rho, 1.0);
        let c = OperatorExpr::relaxation(r.clone(), 1.0).unwrap().certificate().unwrap();
        assert!((c.rho - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            OperatorExpr::relaxation(r, 1.2),
            Err(OperatorError::RelaxationRequiresCutter { .. })
        ));
    }

    #[test]
    fn combination_and_product() {
        let a = proj(&[1.0, 0.0], 0.0);
        let b = OperatorExpr::relaxation(proj(&[0.0, 1.0], 0.0), 1.5).unwrap();
        let comb = OperatorExpr::convex_combination(vec![a.clone(), b.clone()], vec![0.25, 0.75]).unwrap();
        assert!((comb.certificate().unwrap().rho - 1.0 / 3.0).abs() < 1e-15);
        let prod = OperatorExpr::product(vec![a.clone(), a.clone(), a.clone()]).unwrap();
        let c = prod.certificate().unwrap();
        assert!((c.rho - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.derivation.len(), 4);
        let zero = OperatorExpr::convex_combination(vec![a.clone(), b], vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            zero.certificate(),
            Err(OperatorError::CertificateUnavailable { child: 1, .. })
        ));
        assert!(matches!(
            zero.fixed_point_superset(),
            Err(OperatorError::IdentityNotGuaranteed(_))
        ));
    }

    #[test]
    fn qne_factor_breaks_fixed_point_identity() {
        let reflect = OperatorExpr::relaxation(proj(&[1.0, 0.0], 0.0), 2.0).unwrap();
        let prod = OperatorExpr::product(vec![reflect, proj(&[0.0, 1.0], 0.0)]).unwrap();
        assert_eq!(prod.certificate().unwrap().rho, 0.0);
        assert!(matches!(
            prod.fixed_point_superset(),
            Err(OperatorError::IdentityNotGuaranteed(_))
        ));
    }

    #[test]
    fn fixed_point_set_of_product() {
        let prod = OperatorExpr::product(vec![proj(&[1.0, 0.0], 0.0), proj(&[0.0, 1.0], 0.0)]).unwrap();
        let fix = prod.fixed_point_superset().unwrap();
        assert_eq!(fix.sets.len(), 2);
        assert!(fix.contains(&v(&[-1.0, -1.0]), 0.0).unwrap());
        assert!(!fix.contains(&v(&[-1.0, 1.0]), 0.0).unwrap());
        assert_eq!(fix.to_family().unwrap().len(), 2);
        assert!(matches!(
            OperatorExpr::identity().fixed_point_superset().unwrap().to_family(),
            Err(OperatorError::WholeSpace)
        ));
    }
}
