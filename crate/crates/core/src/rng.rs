//! Seeded, splittable random streams.
//!
//! Every worker draws from its own ChaCha8 stream derived from a shared seed
//! and a stream index, so parallel runs are reproducible regardless of
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Seed used when the caller does not pick one.
pub const DEFAULT_SEED: u64 = 0x5eed_1a77_1ce5_0001;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
