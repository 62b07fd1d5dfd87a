//! Seeded randomness.
//!
//! All random vectors come from ChaCha8 streams: a 64-bit seed selects the
//! key and an independent stream id splits it, so right-hand side `i` of an
//! experiment is reproducible on its own regardless of how many others were
//! drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream_id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

pub fn normal_vector<S: Scalar>(n: usize, rng: &mut Rng) -> Vec<S> {
    (0..n).map(|_| S::sample_normal(rng)).collect()
}
