//! Deterministic random streams derived from a master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Independent stream number `stream` of the master `seed`.
///
/// Streams are counter-based (ChaCha stream id), so the samples drawn for a
/// given stream never depend on how work was split across threads.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples per stream when a batch is split into parallel chunks.
pub const CHUNK: usize = 4096;
