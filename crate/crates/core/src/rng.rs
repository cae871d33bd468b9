//! Seeded random streams.
//!
//! Every stochastic draw comes from a ChaCha stream selected by
//! `(seed, stream id)`, so a draw never depends on how work is split into
//! blocks or threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_SIGNS: u64 = 1;
pub const STREAM_SAMPLE_ROWS: u64 = 2;
pub const STREAM_GAUSSIAN: u64 = 3;
pub const STREAM_NYSTROM: u64 = 4;
pub const STREAM_DATA: u64 = 5;
/// Restart `i` of a K-means run uses stream `STREAM_KMEANS_BASE + i`.
pub const STREAM_KMEANS_BASE: u64 = 1 << 16;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// SplitMix64 finalizer; derives independent child seeds (e.g. per trial).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
