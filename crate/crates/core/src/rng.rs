use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// ChaCha8 generator on stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed for independent sub-computations (regions, folds).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // stream 0 is left to direct users of `seed`
    stream_rng(seed, stream.wrapping_add(1)).next_u64()
}
