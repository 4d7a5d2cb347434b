//! Per-module random streams derived from a single run seed.
//!
//! Each module draws from its own ChaCha stream keyed by `(seed, stream id)`.
//! ChaCha is counter based, so the draws of one stream never depend on how
//! many values another stream consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_GENERATOR: u64 = 1;
pub const STREAM_LSTM: u64 = 2;
pub const STREAM_GBT: u64 = 3;
pub const STREAM_LSTM_BASELINE: u64 = 4;
pub const STREAM_GBT_BASELINE: u64 = 5;

pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
