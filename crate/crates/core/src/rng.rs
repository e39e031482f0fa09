//! Seeding helpers. Every stochastic component draws from a
//! xoshiro256++ stream whose seed is mixed with SplitMix64.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SimRng = Xoshiro256PlusPlus;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x5EED)))
}

/// Independent stream `stream` of `seed` (measurement noise, target motion, ...).
pub fn stream(seed: u64, stream: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stream))
}

/// Uniform draw in `[0, 1)` from a counter, without a generator.
pub fn unit_from(seed: u64, counter: u64) -> f64 {
    (derive_seed(seed, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
