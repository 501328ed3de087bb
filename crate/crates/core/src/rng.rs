//! Seeded random streams.
//!
//! Every consumer draws from a ChaCha8 generator keyed by `(seed, stream)`, so
//! replication `i` of a run sees the same numbers regardless of how the
//! replications are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
