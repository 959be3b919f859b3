//! Counter-based random streams.
//!
//! The matrix drawn at step `k` of a sample path depends only on the path seed
//! and `k`, so trajectories, flow accumulators and distance reports that visit
//! steps in different orders still see the same realization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator handed to a model for one step.
pub type StepRng = ChaCha8Rng;

/// Per-step streams of one sample path.
#[derive(Clone, Debug)]
pub struct PathStreams {
    base: ChaCha8Rng,
}

impl PathStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Fresh generator for step `k`; ChaCha stream number `k` of the path key.
    pub fn at(&self, k: u64) -> StepRng {
        let mut rng = self.base.clone();
        rng.set_stream(k);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for a numbered sub-experiment (trial, sample batch, ...).
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    splitmix64(base ^ splitmix64(salt.wrapping_add(0x5851_f42d_4c95_7f2d)))
}
