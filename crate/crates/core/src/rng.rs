//! Deterministic per-trajectory random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent ChaCha stream for `(seed, stream_id)`; identical inputs give
/// identical draws regardless of how work is partitioned across threads.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
