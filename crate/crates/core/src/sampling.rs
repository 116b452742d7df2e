//! Seeded random phase-space points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lax::PhasePoint;

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `q` and `p` drawn uniformly from `[-scale, scale]`.
pub fn random_point<R: Rng>(rng: &mut R, n: usize, scale: f64) -> PhasePoint {
    let q = (0..n).map(|_| rng.gen_range(-scale..=scale)).collect();
    let p = (0..n).map(|_| rng.gen_range(-scale..=scale)).collect();
    PhasePoint::new(q, p).expect("bounded coordinates are always admissible")
}

/// `count` points sharing one seed, generated in a fixed order.
pub fn random_points(seed: u64, n: usize, count: usize, scale: f64) -> Vec<PhasePoint> {
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| random_point(&mut rng, n, scale)).collect()
}
