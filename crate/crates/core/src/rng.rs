//! Deterministic RNG streams.
//!
//! Every randomized component draws from a stream derived by hashing the
//! campaign seed together with a stream name (for per-example streams, the
//! sample id). Streams are therefore independent of worker scheduling and
//! stable across platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives an independent RNG stream from `seed` and a stream name.
pub fn derive_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(stream.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Stream name for the RNG that drives one example's search.
pub fn example_stream(sample_id: &str) -> String {
    format!("sample:{sample_id}")
}
