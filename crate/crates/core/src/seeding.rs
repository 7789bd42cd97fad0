//! Independent, reproducible random streams derived from one root seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for stream `stream` of `seed`; streams never overlap, so the
/// result does not depend on which other streams were drawn or in what
/// order (or on which thread).
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A 64-bit child seed for stream `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    stream_rng(seed, stream).gen()
}
