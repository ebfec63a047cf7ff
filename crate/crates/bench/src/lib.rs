//! Shared fixtures for the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toposcan::scan_order::GridShape;
use toposcan::ssm::FeatureMap;

/// Square grid sides the benches sweep over.
pub const SIDES: [usize; 4] = [16, 32, 64, 128];

/// Uniform `[-1, 1)` features, reproducible per seed.
pub fn random_features(batch: usize, channels: usize, shape: GridShape, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..batch * channels * shape.len())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    FeatureMap::new(batch, channels, shape, data).expect("dims match data length")
}
