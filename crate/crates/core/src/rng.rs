//! Seed derivation and per-episode random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; used to derive independent child seeds from a master seed.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A ChaCha8 stream for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const OUTCOME_STREAM: u64 = 11;
const NOISE_STREAM: u64 = 12;

/// Random streams consumed by skill execution.
///
/// Success draws and noise draws live on separate streams. Every skill consumes a
/// fixed number of outcome draws, so lowering a success probability can only move
/// an episode's first failure earlier.
#[derive(Debug, Clone)]
pub struct SkillRng {
    pub outcome: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl SkillRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            outcome: stream(seed, OUTCOME_STREAM),
            noise: stream(seed, NOISE_STREAM),
        }
    }
}
