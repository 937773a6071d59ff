//! Seeded, stream-split random number generation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent generator for `(seed, stream)`. Different streams of one seed
/// never overlap, so each consumer can own its own sequence.
pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub mod streams {
    pub const CSBM_EDGES: u64 = 1;
    pub const CSBM_FEATURES: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const HEAD_INIT: u64 = 4;
    pub const DROPEDGE: u64 = 5;
    pub const DYNAMICS: u64 = 6;
    pub const INSTANCES: u64 = 7;
}
