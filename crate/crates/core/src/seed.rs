//! Random-stream plumbing.
//!
//! Every stochastic operation takes an explicit stream. Parallel work is split
//! into substreams whose seeds are drawn sequentially from the parent, so the
//! output never depends on how the work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `n` child seeds from `rng`, in order.
pub fn substream_seeds<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.next_u64()).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically mixes a base seed with a path of indices (e.g. sweep
/// cell and repeat number).
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &i| splitmix64(acc ^ splitmix64(i)))
}
