//! Seeded random streams.
//!
//! Every stream is a ChaCha8 block cipher keyed by the 64-bit seed (expanded
//! with the `rand_core` PCG32-based `seed_from_u64`) with a 64-bit stream id
//! and a 64-bit block counter. Each 64-byte block is the keystream for
//! `(key, stream, counter)` and the counter advances by one per block, so a
//! given `(seed, stream)` pair always reproduces the same sequence of draws.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream for worker or level `stream` under the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform in `[0, 1)`.
    pub fn unit<T: Real>(&mut self) -> T {
        T::lit(self.inner.random::<f64>())
    }

    pub fn normal<T: Real>(&mut self) -> T {
        let z: f64 = self.inner.sample(rand_distr::StandardNormal);
        T::lit(z)
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.inner.random_range(0..len)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}
