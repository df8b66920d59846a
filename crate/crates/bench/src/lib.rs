//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use terrasynth::accel::Ray;
use terrasynth::ingest::Heightfield;
use terrasynth::Vec3;

/// Smooth rolling terrain, `n × n` posts at 1 m.
pub fn rolling_terrain(n: usize) -> Heightfield {
    Heightfield::from_fn(n, n, 1.0, |x, y| {
        4.0 * (0.03 * x).sin() * (0.05 * y).cos() + 0.5 * (0.21 * x + 0.13 * y).sin()
    })
    .expect("valid fixture")
}

/// Downward rays from above the terrain, aimed within its footprint.
pub fn downward_rays(h: &Heightfield, count: usize, seed: u64) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ex, ey) = h.extent();
    (0..count)
        .map(|_| {
            let o = Vec3::new(rng.random_range(-ex / 2.0..ex / 2.0), rng.random_range(-ey / 2.0..ey / 2.0), 100.0);
            let d = Vec3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), -1.0);
            Ray::new(o, d, 0.0, f64::INFINITY)
        })
        .collect()
}
