//! Counter-derived random streams.
//!
//! Every random quantity in a simulation is drawn from a stream keyed by the
//! experiment seed plus a short path of counters (trial, cluster, purpose,
//! slot). Streams never depend on scheduling, so results are identical for
//! any number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream purposes. Distinct tags keep truth and observation draws apart.
pub mod purpose {
    pub const TRUTH: u64 = 1;
    pub const SENSORS: u64 = 2;
    pub const READINGS: u64 = 3;
    pub const POLICY: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent generator from `seed` and a counter path.
pub fn stream(seed: u64, path: &[u64]) -> SimRng {
    let mut state = splitmix64(seed);
    for &p in path {
        state = splitmix64(state ^ splitmix64(p.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        let word = splitmix64(state.wrapping_add(i as u64));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
