//! Named, order-independent seed streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SAMPLER: &str = "sampler";
pub const DA_DRAWS: &str = "da-draws";
pub const GAS_SUBSAMPLE: &str = "gas-subsample";
pub const INIT: &str = "init";
pub const EVALUATION: &str = "evaluation";
pub const REPLICATES: &str = "replicates";
pub const NESTED: &str = "nested";
pub const BOOTSTRAP: &str = "bootstrap";

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of the stream `name` under `master`. Streams never shift each other.
pub fn stream_seed(master: u64, name: &str) -> u64 {
    splitmix64(master ^ splitmix64(fnv1a(name)))
}

/// Seed of the `index`-th child of `seed` (chains, steps, replicates).
pub fn child_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn child_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(seed, index))
}
