//! Reproducible generators for the reference problems, returned as ready
//! to run [`ProblemSpec`]s.

use std::collections::BTreeMap;

use rand::Rng;

use crate::geometry::{ConvexSet, GeometryError, SetFamily, Vector};
use crate::problem::{
    ChannelsRecord, FamilyRecord, FunctionRecord, GeometrySection, Mode, OpRef, OperatorRecord, OutputSection,
    PieceRecord, ProblemSpec, ScheduleRecord, SolverSection, StopRecord, Suite, VerifySection, WitnessRecord,
    XStarRecord, XStarRule, SPEC_VERSION,
};
use crate::sampling::{point_in_ball, seeded_rng, unit_direction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InstanceKind {
    /// Two half-spaces in the plane meeting at angle `angle` at the origin.
    Wedge { angle: f64 },
    /// `{x : x_i <= 0}` in `R^dim`.
    Orthant { dim: usize },
    /// `m` half-spaces with a known interior point.
    RandomPolyhedron { dim: usize, m: usize },
    /// One affine-max function with a strictly feasible point, handled by
    /// its subgradient projection. Rows carry positive scalings in
    /// `[0.5, 2]`.
    SlaterPolyhedral { dim: usize, m: usize },
}

/// Half-spaces `<a_i, x> <= b_i` with a point `w` satisfying each with
/// slack at least `0.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub normals: Vec<Vector>,
    pub offsets: Vec<f64>,
    pub interior: Vector,
}

impl Polyhedron {
    pub fn random(dim: usize, m: usize, seed: u64) -> Result<Self, GeometryError> {
        Self::sample(&mut seeded_rng(seed), dim, m)
    }

    fn sample(rng: &mut impl Rng, dim: usize, m: usize) -> Result<Self, GeometryError> {
        if dim == 0 || m == 0 {
            return Err(GeometryError::InvalidArgument("dim and m must be >= 1".into()));
        }
        let interior = point_in_ball(rng, &Vector::zeros(dim), 1.0);
        let mut normals = Vec::with_capacity(m);
        let mut offsets = Vec::with_capacity(m);
        for _ in 0..m {
            let a = unit_direction(rng, dim);
            let margin = rng.random_range(0.1..=1.0);
            offsets.push(a.dot(&interior) + margin);
            normals.push(a);
        }
        let p = Self {
            normals,
            offsets,
            interior,
        };
        debug_assert!(p.slack() >= 0.1 - 1e-12);
        Ok(p)
    }

    /// `min_i (b_i - <a_i, w>)`.
    pub fn slack(&self) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| b - a.dot(&self.interior))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sets(&self) -> Result<Vec<ConvexSet>, GeometryError> {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| ConvexSet::half_space(a.clone(), *b))
            .collect()
    }

    pub fn family(&self) -> Result<SetFamily, GeometryError> {
        SetFamily::new(self.sets()?, Some(self.interior.clone()))
    }

    /// A point well outside: `w + 10 a_0`.
    pub fn start(&self) -> Vector {
        self.interior.axpy(10.0, &self.normals[0])
    }
}

/// The wedge `{x_2 <= 0} ∩ {sin θ x_1 - cos θ x_2 <= 0}`.
pub fn wedge_sets(angle: f64) -> Result<Vec<ConvexSet>, GeometryError> {
    if !(angle > 0.0 && angle < std::f64::consts::PI) {
        return Err(GeometryError::InvalidArgument(format!("wedge angle must lie in (0, pi), got {angle}")));
    }
    Ok(vec![
        ConvexSet::half_space(Vector::new(vec![angle.sin(), -angle.cos()])?, 0.0)?,
        ConvexSet::half_space(Vector::new(vec![0.0, 1.0])?, 0.0)?,
    ])
}

pub fn orthant_sets(dim: usize) -> Result<Vec<ConvexSet>, GeometryError> {
    if dim == 0 {
        return Err(GeometryError::EmptyVector);
    }
    (0..dim)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            ConvexSet::half_space(Vector::new(e)?, 0.0)
        })
        .collect()
}

pub fn gen_instance(kind: InstanceKind, seed: u64) -> Result<ProblemSpec, GeometryError> {
    match kind {
        InstanceKind::Wedge { angle } => {
            let sets = wedge_sets(angle)?;
            let x0 = Vector::new(vec![1.0, 1.0])?;
            Ok(projection_spec(sets, Vector::zeros(2), x0, seed, 1.0, Some(XStarRule::Limit)))
        }
        InstanceKind::Orthant { dim } => {
            let sets = orthant_sets(dim)?;
            let x0 = Vector::new(vec![1.0; dim])?;
            Ok(projection_spec(sets, Vector::zeros(dim), x0, seed, 1.0, Some(XStarRule::Projection)))
        }
        InstanceKind::RandomPolyhedron { dim, m } => {
            let p = Polyhedron::random(dim, m, seed)?;
            Ok(projection_spec(p.sets()?, p.interior.clone(), p.start(), seed, 2.0, Some(XStarRule::Limit)))
        }
        InstanceKind::SlaterPolyhedral { dim, m } => {
            let mut rng = seeded_rng(seed);
            let p = Polyhedron::sample(&mut rng, dim, m)?;
            let scales: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..=2.0)).collect();
            slater_spec(&p, &scales, seed)
        }
    }
}

fn set_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("h{i}")).collect()
}

/// Cyclic projections onto the sets, verified on their product.
fn projection_spec(
    sets: Vec<ConvexSet>,
    witness: Vector,
    x0: Vector,
    seed: u64,
    radius: f64,
    xstar: Option<XStarRule>,
) -> ProblemSpec {
    let ids = set_ids(sets.len());
    let mut operators = BTreeMap::new();
    let mut prims = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let name = format!("P{}", i + 1);
        operators.insert(name.clone(), OperatorRecord::Projection { set: id.clone() });
        prims.push(OpRef::Id(name));
    }
    operators.insert("T".into(), OperatorRecord::Product { children: prims.clone() });
    let center = witness.clone();
    ProblemSpec {
        version: SPEC_VERSION.into(),
        geometry: GeometrySection {
            sets: ids.iter().cloned().zip(sets).collect(),
            families: BTreeMap::from([(
                "C".into(),
                FamilyRecord {
                    sets: ids,
                    witness: Some(witness),
                },
            )]),
        },
        functions: BTreeMap::new(),
        operators,
        schedule: ScheduleRecord::Cyclic { operators: prims },
        solver: Some(SolverSection {
            mode: Mode::Cfp,
            x0: x0.clone(),
            stop: StopRecord {
                residual_tol: 1e-10,
                dist_tol: None,
                xstar_tol: None,
                max_iter: 100_000,
            },
            channels: ChannelsRecord {
                dist_c: true,
                xstar: xstar.map(XStarRecord::Rule),
                witnesses: Some(WitnessRecord {
                    count: 10,
                    seed,
                    radius: radius * 5.0,
                    center: Some(center.clone()),
                }),
            },
        }),
        vi: None,
        verify: Some(VerifySection {
            suites: vec![Suite::Sqne, Suite::Cutter, Suite::CutterDistance, Suite::Aggregate, Suite::Fejer],
            operator: Some(OpRef::Id("T".into())),
            rho: None,
            seed,
            samples: 2_000,
            radius: x0.distance(&center).max(radius) * 2.0,
            center: Some(center),
            fixed_points: 10,
            tolerance: 1e-9,
            modulus_bound: None,
            k_range: 1,
            function: None,
            delta: None,
            big_delta: None,
        }),
        output: OutputSection::default(),
    }
}

/// `f(x) = max_i s_i (<a_i, x> - b_i)`, so `S(f, 0)` is the polyhedron and
/// `f(w) <= -0.05`.
fn slater_spec(p: &Polyhedron, scales: &[f64], seed: u64) -> Result<ProblemSpec, GeometryError> {
    let pieces: Vec<PieceRecord> = p
        .normals
        .iter()
        .zip(&p.offsets)
        .zip(scales)
        .map(|((a, b), s)| PieceRecord { a: a.scaled(*s), b: b * s })
        .collect();
    let ids = set_ids(p.normals.len());
    let x0 = p.start();
    let center = p.interior.clone();
    let big_delta = pieces.iter().map(|q| q.a.norm()).fold(0.0, f64::max);
    Ok(ProblemSpec {
        version: SPEC_VERSION.into(),
        geometry: GeometrySection {
            sets: ids.iter().cloned().zip(p.sets()?).collect(),
            families: BTreeMap::from([(
                "C".into(),
                FamilyRecord {
                    sets: ids,
                    witness: Some(p.interior.clone()),
                },
            )]),
        },
        functions: BTreeMap::from([(
            "f".into(),
            FunctionRecord::AffineMax {
                pieces,
                feasible_point: p.interior.clone(),
            },
        )]),
        operators: BTreeMap::from([(
            "S".into(),
            OperatorRecord::SubgradientProjection { function: "f".into() },
        )]),
        schedule: ScheduleRecord::Static {
            operator: OpRef::Id("S".into()),
        },
        solver: Some(SolverSection {
            mode: Mode::Cfp,
            x0: x0.clone(),
            stop: StopRecord {
                residual_tol: 1e-10,
                dist_tol: None,
                xstar_tol: None,
                max_iter: 100_000,
            },
            channels: ChannelsRecord {
                dist_c: true,
                xstar: None,
                witnesses: Some(WitnessRecord {
                    count: 10,
                    seed,
                    radius: 10.0,
                    center: Some(center.clone()),
                }),
            },
        }),
        vi: None,
        verify: Some(VerifySection {
            suites: vec![Suite::Sqne, Suite::Cutter, Suite::CutterDistance, Suite::Fejer],
            operator: None,
            rho: None,
            seed,
            samples: 2_000,
            radius: x0.distance(&center) * 2.0,
            center: Some(center),
            fixed_points: 10,
            tolerance: 1e-9,
            modulus_bound: None,
            k_range: 1,
            function: Some("f".into()),
            delta: None,
            big_delta: Some(big_delta),
        }),
        output: OutputSection::default(),
    })
}
