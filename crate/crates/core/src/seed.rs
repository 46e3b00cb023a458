//! Deterministic seed derivation.
//!
//! Every random quantity in an experiment is drawn from a ChaCha8 stream
//! whose seed is `child_seed(parent, stream)`: a SplitMix64 finalizer
//! applied to the parent seed mixed with a stream counter. Replicate `r`
//! of an experiment with master seed `s` uses `child_seed(s, r)`, and
//! inside a replicate the model path, the sampling design, the noise and
//! the projections use fixed stream tags below. Results therefore never
//! depend on the order in which replicates are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used inside one replicate.
pub mod stream {
    pub const SERIES: u64 = 0x5345_5249;
    pub const LOCATIONS: u64 = 0x4c4f_4341;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const PROJECTIONS: u64 = 0x5052_4f4a;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of child stream `stream` under `parent`.
pub fn child_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ stream.wrapping_mul(GOLDEN))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for sub-stream `stream` of `seed`.
pub(crate) fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
