//! Per-path random streams.
//!
//! Every path index gets its own ChaCha stream under a common master seed, so
//! the draws of path `i` never depend on how paths are scheduled on workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
