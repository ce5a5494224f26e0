use crate::geometry::{Vector, ORACLE_TOL};
use crate::operators::{ConvexFunction, OperatorError, OperatorExpr};
use crate::sampling::BallSampler;
use crate::solver::IterationTrace;

use super::{positive, CheckKind, RegularityError, RegularityReport, Tally};

/// Claimed fixed points must move by less than this.
const FIXED_POINT_TOL: f64 = 1e-10;
/// Rows whose residual is below this are not tested by
/// [`check_trace_regularity`].
pub const TRACE_RESIDUAL_FLOOR: f64 = 1e-12;

fn samples(center: &Vector, radius: f64, n: usize, seed: u64) -> Result<BallSampler, RegularityError> {
    positive("radius", radius)?;
    if n == 0 {
        return Err(RegularityError::InvalidArgument("n must be >= 1".into()));
    }
    Ok(BallSampler::new(center.clone(), radius, seed))
}

fn validate_fixed_points(op: &OperatorExpr, fixed_points: &[Vector]) -> Result<(), RegularityError> {
    if fixed_points.is_empty() {
        return Err(RegularityError::InvalidArgument("no fixed points supplied".into()));
    }
    for (index, z) in fixed_points.iter().enumerate() {
        let residual = op.residual(z)?;
        if !(residual < FIXED_POINT_TOL) {
            return Err(RegularityError::BadWitness { index, residual });
        }
    }
    Ok(())
}

/// `n` points of `Fix op` from Dykstra projections of ball samples.
pub fn fixed_points_for(
    op: &OperatorExpr,
    n: usize,
    center: &Vector,
    radius: f64,
    seed: u64,
) -> Result<Vec<Vector>, RegularityError> {
    let family = op.fixed_point_superset()?.to_family()?;
    Ok(family.sample_members(n, center, radius, seed, ORACLE_TOL)?)
}

/// `||Tu - z||² - ||u - z||² + ρ||Tu - u||² <= tol` over samples `u` and
/// the supplied fixed points `z`.
#[allow(clippy::too_many_arguments)]
pub fn check_sqne(
    op: &OperatorExpr,
    rho: f64,
    fixed_points: &[Vector],
    center: &Vector,
    radius: f64,
    n: usize,
    seed: u64,
    tol: f64,
) -> Result<RegularityReport, RegularityError> {
    if !(rho >= 0.0) {
        return Err(RegularityError::InvalidArgument(format!("rho must be >= 0, got {rho}")));
    }
    validate_fixed_points(op, fixed_points)?;
    let mut tally = Tally::new(CheckKind::Sqne, tol, Some(seed));
    for u in samples(center, radius, n, seed)?.take(n) {
        let tu = op.apply(&u)?;
        let step = tu.distance(&u).powi(2);
        for z in fixed_points {
            let violation = tu.distance(z).powi(2) - u.distance(z).powi(2) + rho * step;
            tally.observe(violation, Tally::at_point(&u));
        }
    }
    Ok(tally.finish())
}

/// Both cutter forms, `<x - Tx, z - Tx> <= 0` and
/// `||Tx - x||² <= <Tx - x, z - x>`; the worse one is reported.
pub fn check_cutter(
    op: &OperatorExpr,
    fixed_points: &[Vector],
    center: &Vector,
    radius: f64,
    n: usize,
    seed: u64,
    tol: f64,
) -> Result<RegularityReport, RegularityError> {
    validate_fixed_points(op, fixed_points)?;
    let mut tally = Tally::new(CheckKind::Cutter, tol, Some(seed));
    for x in samples(center, radius, n, seed)?.take(n) {
        let tx = op.apply(&x)?;
        let back = &x - &tx;
        let step = &tx - &x;
        for z in fixed_points {
            let first = back.dot(&(z - &tx));
            let second = step.norm_sq() - step.dot(&(z - &x));
            tally.observe(first.max(second), Tally::at_point(&x));
        }
    }
    Ok(tally.finish())
}

/// `||Tx - x|| - d(x, Fix T) <= tol`, the distance from the Dykstra oracle
/// on the fixed-point family.
pub fn check_cutter_distance(
    op: &OperatorExpr,
    center: &Vector,
    radius: f64,
    n: usize,
    seed: u64,
    tol: f64,
) -> Result<RegularityReport, RegularityError> {
    let family = match op.fixed_point_superset()?.to_family() {
        Ok(f) => Some(f),
        Err(OperatorError::WholeSpace) => None,
        Err(e) => return Err(e.into()),
    };
    let mut tally = Tally::new(CheckKind::CutterDistance, tol, Some(seed));
    for x in samples(center, radius, n, seed)?.take(n) {
        let d = match &family {
            Some(f) => f.distance_intersection(&x, ORACLE_TOL)?,
            None => 0.0,
        };
        tally.observe(op.residual(&x)? - d, Tally::at_point(&x));
    }
    Ok(tally.finish())
}

/// Every combination and product node of the tree, root included.
fn internal_nodes<'a>(op: &'a OperatorExpr, out: &mut Vec<&'a OperatorExpr>) {
    match op {
        OperatorExpr::Relaxation { child, .. } => internal_nodes(child, out),
        OperatorExpr::ConvexCombination { children, .. } | OperatorExpr::Product(children) => {
            out.push(op);
            for c in children {
                internal_nodes(c, out);
            }
        }
        _ => {}
    }
}

/// At every combination node `U = Σ ω_i U_i`:
/// `||Ux - z||² <= ||x - z||² - Σ ω_i ρ_i ||U_i x - x||²` and
/// `(1/2R) Σ ω_i ρ_i ||U_i x - x||² <= ||Ux - x||` with `R = ||x - z||`.
/// At every product node the same with `Σ ρ_i ||Q_i x - Q_{i-1} x||²`.
/// The fixed points must be common fixed points of the whole tree.
pub fn check_aggregate(
    op: &OperatorExpr,
    fixed_points: &[Vector],
    center: &Vector,
    radius: f64,
    n: usize,
    seed: u64,
    tol: f64,
) -> Result<RegularityReport, RegularityError> {
    validate_fixed_points(op, fixed_points)?;
    let mut nodes = Vec::new();
    internal_nodes(op, &mut nodes);
    // Child constants per node; nodes whose children lack a certificate are skipped.
    let mut prepared = Vec::new();
    for node in nodes {
        let children = match node {
            OperatorExpr::ConvexCombination { children, .. } | OperatorExpr::Product(children) => children,
            _ => unreachable!("internal nodes only"),
        };
        let rhos: Result<Vec<f64>, _> = children.iter().map(|c| c.certificate().map(|c| c.rho)).collect();
        if let Ok(rhos) = rhos {
            prepared.push((node, rhos));
        }
    }
    let mut tally = Tally::new(CheckKind::Aggregate, tol, Some(seed));
    for x in samples(center, radius, n, seed)?.take(n) {
        for (node, rhos) in &prepared {
            let (ux, sum) = match node {
                OperatorExpr::ConvexCombination { children, weights } => {
                    let mut sum = 0.0;
                    for ((child, &w), &rho) in children.iter().zip(weights).zip(rhos) {
                        sum += w * rho * child.apply(&x)?.distance(&x).powi(2);
                    }
                    (node.apply(&x)?, sum)
                }
                _ => {
                    let q = node.apply_with_prefixes(&x)?;
                    let sum: f64 = q
                        .windows(2)
                        .zip(rhos)
                        .map(|(w, &rho)| rho * w[1].distance(&w[0]).powi(2))
                        .sum();
                    (q.last().expect("nonempty").clone(), sum)
                }
            };
            let moved = ux.distance(&x);
            for z in fixed_points {
                let r = x.distance(z);
                tally.observe(ux.distance(z).powi(2) - r * r + sum, Tally::at_point(&x));
                if r > 0.0 {
                    tally.observe(sum / (2.0 * r) - moved, Tally::at_point(&x));
                }
            }
        }
    }
    Ok(tally.finish())
}

/// `d(x^k, C) <= δ residual_k + tol` on rows with residual at least
/// [`TRACE_RESIDUAL_FLOOR`].
pub fn check_trace_regularity(
    trace: &IterationTrace,
    delta: f64,
    tol: f64,
) -> Result<RegularityReport, RegularityError> {
    if !(delta >= 0.0) {
        return Err(RegularityError::InvalidArgument(format!("delta must be >= 0, got {delta}")));
    }
    let mut tally = Tally::new(CheckKind::TraceRegularity, tol, None);
    for row in &trace.rows {
        let d = row.dist_c.ok_or(RegularityError::MissingChannel("dist_C"))?;
        if row.residual >= TRACE_RESIDUAL_FLOOR {
            tally.observe(d - delta * row.residual, Tally::at_step(row.k));
        }
    }
    Ok(tally.finish())
}

/// Largest recorded Fejér slack against `tol`.
pub fn check_fejer(trace: &IterationTrace, tol: f64) -> Result<RegularityReport, RegularityError> {
    let mut tally = Tally::new(CheckKind::Fejer, tol, None);
    for row in &trace.rows {
        let s = row.fejer_slack.ok_or(RegularityError::MissingChannel("fejer_slack"))?;
        tally.observe(s, Tally::at_step(row.k));
    }
    Ok(tally.finish())
}

/// `(δ/Δ) d(x, S(f, 0)) - ||x - P_f x|| <= tol` over samples, the distance
/// from the Dykstra oracle on the sublevel family.
#[allow(clippy::too_many_arguments)]
pub fn check_subgradient_regularity(
    f: &ConvexFunction,
    delta: f64,
    big_delta: f64,
    center: &Vector,
    radius: f64,
    n: usize,
    seed: u64,
    tol: f64,
) -> Result<RegularityReport, RegularityError> {
    positive("delta", delta)?;
    positive("Delta", big_delta)?;
    let family = f
        .sublevel_family()
        .ok_or_else(|| RegularityError::InvalidArgument("sublevel set is the whole space".into()))?;
    let ratio = delta / big_delta;
    let mut tally = Tally::new(CheckKind::SubgradientRegularity, tol, Some(seed));
    for x in samples(center, radius, n, seed)?.take(n) {
        let d = family.distance_intersection(&x, ORACLE_TOL)?;
        let step = x.distance(&f.project(&x)?);
        tally.observe(ratio * d - step, Tally::at_point(&x));
    }
    Ok(tally.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexSet;
    use crate::schedules::Schedule;
    use crate::solver::{solve_cfp, Channels, StopRule};

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c).unwrap()
    }

    fn half() -> OperatorExpr {
        OperatorExpr::projection(ConvexSet::half_space(v(&[1.0, 0.0]), 0.0).unwrap())
    }

    fn zs() -> Vec<Vector> {
        vec![v(&[0.0, 0.0]), v(&[-1.0, 2.0]), v(&[-0.5, -3.0])]
    }

    #[test]
    fn projection_is_one_sqne_not_two_and_a_half() {
        let c = v(&[0.0, 0.0]);
        let r = check_sqne(&half(), 1.0, &zs(), &c, 4.0, 500, 1, 1e-9).unwrap();
        assert!(r.pass, "{r:?}");
        // x = (2, 0), z = 0: ||Tx - z||² = 0, ||x - z||² = 4, ||Tx - x||² = 4, so
        // rho = 2.5 gives 0 - 4 + 10 = 6 > 0.
        let r = check_sqne(&half(), 2.5, &zs(), &c, 4.0, 500, 1, 1e-9).unwrap();
        assert!(!r.pass);
        assert!(r.witness.unwrap().input.is_some());
        let r = check_sqne(&OperatorExpr::identity(), 0.0, &zs(), &c, 4.0, 100, 1, 1e-9).unwrap();
        assert!(r.pass && r.worst_violation == 0.0);
    }

    #[test]
    fn bad_fixed_point() {
        let err = check_sqne(&half(), 1.0, &[v(&[1.0, 0.0])], &v(&[0.0, 0.0]), 1.0, 10, 0, 1e-9).unwrap_err();
        assert!(matches!(err, RegularityError::BadWitness { index: 0, .. }));
    }

    #[test]
    fn reflector_is_not_a_cutter() {
        let c = v(&[0.0, 0.0]);
        assert!(check_cutter(&half(), &zs(), &c, 4.0, 500, 2, 1e-9).unwrap().pass);
        let reflect = OperatorExpr::relaxation(half(), 2.0).unwrap();
        assert!(!check_cutter(&reflect, &zs(), &c, 4.0, 500, 2, 1e-9).unwrap().pass);
        let r = check_cutter(&OperatorExpr::identity(), &zs(), &c, 4.0, 50, 2, 1e-9).unwrap();
        assert!(r.pass && r.worst_violation == 0.0);
    }

    #[test]
    fn aggregate_on_product_of_combinations() {
        let b = OperatorExpr::projection(ConvexSet::half_space(v(&[0.0, 1.0]), 1.0).unwrap());
        let comb = OperatorExpr::convex_combination(vec![half(), b.clone()], vec![0.3, 0.7]).unwrap();
        let op = OperatorExpr::product(vec![comb, OperatorExpr::relaxation(b, 1.7).unwrap(), half()]).unwrap();
        let fix = fixed_points_for(&op, 10, &v(&[0.0, 0.0]), 5.0, 3).unwrap();
        let r = check_aggregate(&op, &fix, &v(&[0.0, 0.0]), 6.0, 400, 9, 1e-9).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(check_cutter_distance(&half(), &v(&[0.0, 0.0]), 3.0, 200, 1, 1e-9).unwrap().pass);
    }

    #[test]
    fn trace_regularity_and_fejer() {
        let set = ConvexSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let s = Schedule::static_schedule(OperatorExpr::projection(set)).unwrap();
        let channels = Channels {
            dist_c: true,
            witnesses: vec![v(&[0.0, 0.0]), v(&[0.5, 0.5])],
            ..Channels::default()
        };
        let t = solve_cfp(&s, &v(&[3.0, 4.0]), &StopRule::new(1e-12, 10), &channels).unwrap();
        assert!(check_trace_regularity(&t, 1.0, 1e-12).unwrap().pass);
        assert!(!check_trace_regularity(&t, 0.0, 1e-12).unwrap().pass);
        assert!(check_fejer(&t, 1e-12).unwrap().pass);
        let bare = solve_cfp(&s, &v(&[3.0, 4.0]), &StopRule::new(1e-12, 10), &Channels::default()).unwrap();
        assert!(matches!(
            check_trace_regularity(&bare, 1.0, 0.0),
            Err(RegularityError::MissingChannel(_))
        ));
    }
}
