//! Seeded randomness.
//!
//! Every stochastic draw in the crate goes through [`RandomSource`], a thin
//! wrapper over ChaCha8 (`rand_chacha::ChaCha8Rng`). ChaCha8 output for a
//! given seed is stable across platforms and crate releases, which is what
//! makes CSV output byte-reproducible. Independent streams for the same seed
//! come from ChaCha's 64-bit stream selector rather than from re-seeding.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::word::Word;

pub const ALGORITHM: &str = "chacha8";

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// A fresh source on stream `stream` of this source's seed.
    ///
    /// The derived source starts at the beginning of its stream regardless
    /// of how many draws `self` has made.
    pub fn derive(&self, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        Self { seed: self.seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// `true` with probability `p`; `p <= 0` never fires and `p >= 1` always does.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform in `0..n`. `n` must be non-zero.
    pub fn below(&mut self, n: u32) -> u32 {
        self.rng.random_range(0..n)
    }

    /// A uniformly random word of the given width.
    pub fn word(&mut self, width: u32) -> Word {
        Word::truncating(self.next_u64(), width).expect("caller validated width")
    }
}
