mod common;

use fejerkit::instances::{gen_instance, InstanceKind, Polyhedron};
use fejerkit::regularity::{composed_modulus_combination, composed_modulus_product, estimate_linear_modulus, relaxed_modulus};
use fejerkit::sampling::{point_in_ball, seeded_rng};
use fejerkit::schedules::Schedule;
use fejerkit::{OperatorExpr, ProblemSpec};
use proptest::prelude::*;

use common::random_set;

fn polyhedron_product(seed: u64) -> (Schedule, fejerkit::SetFamily, fejerkit::Vector) {
    let p = Polyhedron::random(3, 4, seed).unwrap();
    let ops = p.sets().unwrap().into_iter().map(OperatorExpr::projection).collect();
    let op = OperatorExpr::product(ops).unwrap();
    (Schedule::static_schedule(op).unwrap(), p.family().unwrap(), p.interior)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn relaxing_scales_the_estimate(seed in 0u64..1000, lambda in 0.2f64..1.0) {
        let p = Polyhedron::random(3, 4, seed).unwrap();
        let ops: Vec<_> = p.sets().unwrap().into_iter().map(OperatorExpr::projection).collect();
        let op = OperatorExpr::product(ops).unwrap();
        let target = p.family().unwrap();
        let plain = Schedule::static_schedule(op.clone()).unwrap();
        let relaxed = Schedule::static_schedule(OperatorExpr::relaxation(op, lambda).unwrap()).unwrap();
        let a = estimate_linear_modulus(&plain, &target, &p.interior, 5.0, 300, 1, seed).unwrap();
        let b = estimate_linear_modulus(&relaxed, &target, &p.interior, 5.0, 300, 1, seed).unwrap();
        prop_assert!((b.delta_hat - a.delta_hat / lambda).abs() <= 1e-6 * b.delta_hat);
    }

    #[test]
    fn longer_sample_runs_dominate(seed in 0u64..1000, n in 10usize..200) {
        let (sched, target, w) = polyhedron_product(seed);
        let short = estimate_linear_modulus(&sched, &target, &w, 5.0, n, 1, seed).unwrap();
        let long = estimate_linear_modulus(&sched, &target, &w, 5.0, 2 * n, 1, seed).unwrap();
        prop_assert!(short.delta_hat <= long.delta_hat + 1e-12);
    }

    #[test]
    fn composed_moduli_are_monotone(
        kappa in 1.0f64..5.0,
        delta in 1.0f64..5.0,
        sigma in 0.1f64..2.0,
        p in 1usize..6,
        bump in 0.01f64..1.0,
    ) {
        let c = composed_modulus_combination(kappa, delta, sigma).unwrap();
        prop_assert!(composed_modulus_combination(kappa + bump, delta, sigma).unwrap() >= c);
        prop_assert!(composed_modulus_combination(kappa, delta + bump, sigma).unwrap() >= c);
        prop_assert!(composed_modulus_combination(kappa, delta, sigma + bump).unwrap() <= c);
        let m = composed_modulus_product(kappa, delta, sigma, p).unwrap();
        prop_assert!(composed_modulus_product(kappa, delta, sigma, p + 1).unwrap() >= m);
        prop_assert!(composed_modulus_product(kappa + bump, delta, sigma, p).unwrap() >= m);
        let lambda = bump.min(1.0);
        prop_assert!(relaxed_modulus(delta, lambda).unwrap() >= delta);
    }

    #[test]
    fn projection_is_idempotent(seed in 0u64..10_000, dim in 1usize..6) {
        let mut rng = seeded_rng(seed);
        let w = point_in_ball(&mut rng, &fejerkit::Vector::zeros(dim), 1.0);
        let set = random_set(&mut rng, &w);
        let x = point_in_ball(&mut rng, &w, 10.0);
        let px = set.project(&x).unwrap();
        prop_assert!(set.contains(&px, 1e-10).unwrap());
        prop_assert!(set.project(&px).unwrap().distance(&px) <= 1e-12 * (1.0 + px.norm()));
        prop_assert!(px.distance(&x) <= w.distance(&x) + 1e-12);
    }

    #[test]
    fn generated_specs_round_trip(seed in 0u64..10_000, pick in 0usize..4, dim in 2usize..5, extra in 1usize..4) {
        let kind = match pick {
            0 => InstanceKind::Wedge { angle: 0.1 + (seed % 29) as f64 / 10.0 },
            1 => InstanceKind::Orthant { dim },
            2 => InstanceKind::RandomPolyhedron { dim, m: dim + extra },
            _ => InstanceKind::SlaterPolyhedral { dim, m: dim + extra },
        };
        let spec = gen_instance(kind, seed).unwrap();
        let back = ProblemSpec::from_json(&spec.to_json()).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(back.to_json(), spec.to_json());
    }
}
