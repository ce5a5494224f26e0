//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use fejerkit::operators::AffinePiece;
use fejerkit::sampling::{point_in_ball, unit_direction};
use fejerkit::{ConvexFunction, ConvexSet, OperatorExpr, SetFamily, Vector};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn v(c: &[f64]) -> Vector {
    Vector::from_slice(c).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean distance from the origin to `conv(points)`: every support is
/// tried through its affine-hull KKT system and only genuine convex
/// combinations are kept, so the result is never below the true value.
pub fn min_norm_in_hull(points: &[Vec<f64>]) -> f64 {
    let r = points.len();
    let dim = points[0].len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << r) {
        let idx: Vec<usize> = (0..r).filter(|i| mask & (1 << i) != 0).collect();
        let k = idx.len();
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        for a in 0..k {
            for b in 0..k {
                kkt[(a, b)] = dot(&points[idx[a]], &points[idx[b]]);
            }
            kkt[(a, k)] = 1.0;
            kkt[(k, a)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs[k] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let w: Vec<f64> = (0..k).map(|i| sol[i]).collect();
        let total: f64 = w.iter().sum();
        if w.iter().any(|&x| !(x >= -1e-12)) || (total - 1.0).abs() > 1e-9 {
            continue;
        }
        let mut p = vec![0.0; dim];
        for (wi, &i) in w.iter().zip(&idx) {
            for (pj, aj) in p.iter_mut().zip(&points[i]) {
                *pj += wi.max(0.0) / total * aj;
            }
        }
        best = best.min(dot(&p, &p).sqrt());
    }
    best
}

/// Hoffman constant of `{x : Ax <= b}` for the max-violation residual:
/// `d(x, C) <= H max_i (<a_i, x> - b_i)_+` for every consistent `b`.
/// The maximum of `1 / d(0, conv{a_j : j in J})` over subsets `J` whose
/// hull misses the origin.
pub fn hoffman_constant(rows: &[Vec<f64>]) -> f64 {
    let m = rows.len();
    let mut h: f64 = 0.0;
    for mask in 1u32..(1 << m) {
        let sub: Vec<Vec<f64>> = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| rows[i].clone()).collect();
        let d = min_norm_in_hull(&sub);
        if d > 1e-12 {
            h = h.max(1.0 / d);
        }
    }
    h
}

/// Unit boundary rays of the wedge of angle `theta`.
fn wedge_rays(theta: f64) -> [[f64; 2]; 2] {
    [[-1.0, 0.0], [-theta.cos(), -theta.sin()]]
}

fn wedge_contains(theta: f64, x: [f64; 2]) -> bool {
    x[1] <= 0.0 && theta.sin() * x[0] - theta.cos() * x[1] <= 0.0
}

/// Closed-form projection onto the wedge: an outside point projects onto
/// one of the two boundary rays.
pub fn wedge_project(theta: f64, x: [f64; 2]) -> [f64; 2] {
    if wedge_contains(theta, x) {
        return x;
    }
    let mut best = [0.0, 0.0];
    let mut best_d = f64::INFINITY;
    for u in wedge_rays(theta) {
        let t = (x[0] * u[0] + x[1] * u[1]).max(0.0);
        let p = [t * u[0], t * u[1]];
        let d = (x[0] - p[0]).hypot(x[1] - p[1]);
        if d < best_d {
            best_d = d;
            best = p;
        }
    }
    best
}

pub fn wedge_distance(theta: f64, x: [f64; 2]) -> f64 {
    let p = wedge_project(theta, x);
    (x[0] - p[0]).hypot(x[1] - p[1])
}

/// `sup d(x, C) / max_i d(x, C_i)` over `n` directions on the unit circle
/// (the sets are cones, so the ratio is scale invariant).
pub fn wedge_kappa_grid(theta: f64, n: usize) -> f64 {
    let normals = [[theta.sin(), -theta.cos()], [0.0, 1.0]];
    let mut best: f64 = 1.0;
    for i in 0..n {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let x = [phi.cos(), phi.sin()];
        let worst = normals
            .iter()
            .map(|a| (a[0] * x[0] + a[1] * x[1]).max(0.0))
            .fold(0.0, f64::max);
        if worst > 1e-12 {
            best = best.max(wedge_distance(theta, x) / worst);
        }
    }
    best
}

/// A closed convex set of dimension `dim` with `w` in its interior.
pub fn random_set(rng: &mut impl Rng, w: &Vector) -> ConvexSet {
    let dim = w.dim();
    match rng.random_range(0..3) {
        0 => {
            let a = unit_direction(rng, dim);
            let b = a.dot(w) + rng.random_range(0.05..1.0);
            ConvexSet::half_space(a, b).unwrap()
        }
        1 => {
            let radius = rng.random_range(0.5..2.0);
            let center = point_in_ball(rng, w, radius - 0.05);
            ConvexSet::ball(center, radius).unwrap()
        }
        _ => {
            let lower: Vec<f64> = w.iter().map(|c| c - rng.random_range(0.05..1.0)).collect();
            let upper: Vec<f64> = w.iter().map(|c| c + rng.random_range(0.05..1.0)).collect();
            ConvexSet::bounding_box(Vector::new(lower).unwrap(), Vector::new(upper).unwrap()).unwrap()
        }
    }
}

fn random_leaf(rng: &mut impl Rng, w: &Vector) -> OperatorExpr {
    match rng.random_range(0..6) {
        0 => {
            let pieces = (0..rng.random_range(1..=3))
                .map(|_| {
                    let a = unit_direction(rng, w.dim()).scaled(rng.random_range(0.5..2.0));
                    let b = a.dot(w) + rng.random_range(0.05..1.0);
                    AffinePiece::new(a, b)
                })
                .collect();
            OperatorExpr::subgradient_projection(ConvexFunction::affine_max(pieces, w.clone()).unwrap())
        }
        1 => {
            let sets = (0..rng.random_range(2..=3)).map(|_| random_set(rng, w)).collect();
            OperatorExpr::furthest_projection(SetFamily::new(sets, Some(w.clone())).unwrap())
        }
        _ => OperatorExpr::projection(random_set(rng, w)),
    }
}

/// A random expression of depth at most `depth` whose leaves all fix `w`.
pub fn random_tree(rng: &mut impl Rng, w: &Vector, depth: usize) -> OperatorExpr {
    if depth == 0 || rng.random_bool(0.25) {
        return random_leaf(rng, w);
    }
    match rng.random_range(0..3) {
        0 => {
            let child = random_tree(rng, w, depth - 1);
            let cutter = child.certificate().unwrap().is_cutter;
            let lambda = if cutter {
                rng.random_range(0.1..1.9)
            } else {
                rng.random_range(0.1..=1.0)
            };
            OperatorExpr::relaxation(child, lambda).unwrap()
        }
        1 => {
            let n = rng.random_range(2..=3);
            let children = (0..n).map(|_| random_tree(rng, w, depth - 1)).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            OperatorExpr::convex_combination(children, raw.iter().map(|x| x / total).collect()).unwrap()
        }
        _ => {
            let n = rng.random_range(2..=3);
            OperatorExpr::product((0..n).map(|_| random_tree(rng, w, depth - 1)).collect()).unwrap()
        }
    }
}
