//! Seeded random streams. Every consumer of randomness draws from its own
//! stream so adding draws in one place never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod stream {
    pub const INIT: u64 = 1;
    pub const DEMO_NAV: u64 = 2;
    pub const DEMO_REC: u64 = 3;
    pub const SHUFFLE: u64 = 1 << 8;
    pub const COLLECT: u64 = 2 << 8;
    pub const EVAL: u64 = 3 << 8;
    pub const BRIDGE: u64 = 4 << 8;
}

/// Independent generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
