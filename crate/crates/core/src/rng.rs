//! Deterministic seed derivation.
//!
//! Every random task (restart, bootstrap replicate, permutation) gets its own
//! generator seeded from the master seed and a tuple of stream indices, so
//! results do not depend on the order in which rayon schedules the tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a list of stream identifiers.
pub fn derive_seed(master: u64, streams: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &s in streams {
        h = splitmix64(h ^ splitmix64(s.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream_rng(master: u64, streams: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, streams))
}
