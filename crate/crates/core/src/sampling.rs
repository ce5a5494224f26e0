//! Seeded sampling used by every estimator and property check.
//!
//! All randomness goes through [`ChaCha8Rng`] seeded from a `u64`, a
//! counter-based stream that reproduces bit-for-bit across runs and
//! platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::Vector;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit vector with a uniformly distributed direction.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return Vector::from_raw(g.into_iter().map(|c| c / norm).collect());
        }
    }
}

/// Uniform point in the closed ball `B(center, radius)`: Gaussian direction,
/// radius scaled by `U^(1/dim)`.
pub fn point_in_ball<R: Rng + ?Sized>(rng: &mut R, center: &Vector, radius: f64) -> Vector {
    let dim = center.dim();
    let direction = unit_direction(rng, dim);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / dim as f64);
    center.axpy(r, &direction)
}

/// Endless stream of uniform samples from a ball. The `k`-th sample does not
/// depend on how many samples are drawn afterwards, so estimates over a
/// prefix are always dominated by estimates over a longer run.
pub struct BallSampler {
    rng: ChaCha8Rng,
    center: Vector,
    radius: f64,
}

impl BallSampler {
    pub fn new(center: Vector, radius: f64, seed: u64) -> Self {
        Self {
            rng: seeded_rng(seed),
            center,
            radius,
        }
    }
}

impl Iterator for BallSampler {
    type Item = Vector;

    fn next(&mut self) -> Option<Vector> {
        Some(point_in_ball(&mut self.rng, &self.center, self.radius))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_stay_in_ball_and_replay() {
        let c = Vector::from_slice(&[1.0, -2.0, 0.5]).unwrap();
        let a: Vec<Vector> = BallSampler::new(c.clone(), 3.0, 11).take(500).collect();
        let b: Vec<Vector> = BallSampler::new(c.clone(), 3.0, 11).take(500).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| x.distance(&c) <= 3.0 + 1e-12));
    }

    #[test]
    fn radius_distribution_is_not_center_heavy() {
        // For a uniform disk, P(r <= R/2) = 1/4.
        let c = Vector::zeros(2);
        let inner = BallSampler::new(c.clone(), 1.0, 5)
            .take(20_000)
            .filter(|x| x.norm() <= 0.5)
            .count();
        let frac = inner as f64 / 20_000.0;
        assert!((frac - 0.25).abs() < 0.02, "{frac}");
    }
}
