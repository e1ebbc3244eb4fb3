//! Named random sub-streams derived from one root seed.
//!
//! Every component draws from its own ChaCha stream so that changing, say,
//! the sampler does not perturb the SVD sketch or the initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const SPLIT: &str = "split";
pub const SKETCH: &str = "sketch";
pub const INIT: &str = "init";
pub const SHUFFLE: &str = "shuffle";
pub const SAMPLER: &str = "sampler";
pub const SYNTH: &str = "synth";

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Generator for sub-stream `name` number `index` under `seed`.
pub fn stream(seed: u64, name: &str, index: u64) -> Rng {
    let key = splitmix64(seed ^ fnv1a(name)) ^ splitmix64(index.wrapping_add(0x5151));
    ChaCha8Rng::seed_from_u64(key)
}
