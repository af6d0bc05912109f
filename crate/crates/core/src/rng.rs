//! Seeded RNG plumbing.
//!
//! Every sampling entry point in this crate takes a `u64` seed and builds
//! its own [`ChaCha8Rng`]; there is no global RNG state. Pipelines that run
//! several sampling stages derive one sub-seed per stage with
//! [`derive_seed`] so that stages stay independent of each other's draw
//! counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Build the crate-standard seeded generator.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a stable sub-seed for a labelled component of a larger run.
///
/// FNV-1a over the seed bytes followed by the label, so
/// `derive_seed(s, "wiki.graph")` never collides with the article streams
/// in practice and is reproducible across platforms.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes().iter().chain(label.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}
