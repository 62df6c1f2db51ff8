//! Seed splitting.
//!
//! A run takes one global seed. Every randomized component derives its own
//! stream from `(global seed, component tag, index)` through
//! [`derive_seed`], so adding a new component never shifts the draws of the
//! existing ones. The rule is:
//!
//! ```text
//! derive_seed(seed, tag, index) = splitmix64(splitmix64(seed ^ fnv1a64(tag)) ^ index)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a64(tag: &str) -> u64 {
    tag.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a64(tag)) ^ index)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, tag: &str, index: u64) -> Rng {
    rng(derive_seed(seed, tag, index))
}
