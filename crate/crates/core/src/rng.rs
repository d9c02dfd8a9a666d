//! Counter-based random streams.
//!
//! A uniform variate is a pure function of `(seed, stream, counter)`: the
//! ChaCha keystream for `seed` on stream `stream` is addressed at word
//! position `2·counter`. Evaluation order therefore never changes results,
//! which lets parallel ensembles reproduce serial runs bit for bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser; used to derive independent seeds from a master seed.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone)]
pub struct CounterStream {
    rng: ChaCha8Rng,
}

impl CounterStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn u64_at(&mut self, counter: u64) -> u64 {
        self.rng.set_word_pos(u128::from(counter) * 2);
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform_at(&mut self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
