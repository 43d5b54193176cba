//! Seeded random streams.
//!
//! Every randomized operation takes an explicit `u64` seed. The seed selects a
//! ChaCha8 key and the operation selects its own stream, so reusing one seed
//! for, say, a random walk and a p-value draw never correlates the two.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const STREAM_GRAPH: u64 = 1;
pub(crate) const STREAM_WALK: u64 = 2;
pub(crate) const STREAM_NULL: u64 = 3;
pub(crate) const STREAM_SIGNAL: u64 = 4;

pub(crate) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
