//! Named random sub-streams derived from one user seed.
//!
//! Every stochastic component draws from `substream(seed, "<name>")`, so a
//! component can be reproduced in isolation without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Mixes a seed with a stream name (FNV-1a over the name, then splitmix64).
pub fn derive(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(seed ^ h)
}

pub fn derive_index(seed: u64, index: u64) -> u64 {
    splitmix(seed.wrapping_add(splitmix(index.wrapping_add(0x9e37_79b9_7f4a_7c15))))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, name: &str) -> Rng {
    Rng::seed_from_u64(derive(seed, name))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
