//! Counter-addressable random numbers.
//!
//! Draw `i` of stream `s` is a pure function of `(seed, s, i)`, so simulations
//! and bootstrap replicates give identical results regardless of thread count
//! or evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::norm_inv;

/// SplitMix64 finalizer: derives an independent child seed from a root seed
/// and a tag (for example a date ordinal or replicate index).
pub fn derive_seed(root: u64, tag: u64) -> u64 {
    let mut z = root ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A sequential generator positioned at the start of `stream`.
    pub fn stream(&self, stream: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        StreamRng { rng }
    }

    /// Uniform draw on the open interval (0, 1) at position `index` of `stream`.
    pub fn uniform(&self, stream: u64, index: u64) -> f64 {
        let mut s = self.stream(stream);
        s.seek(index);
        s.next_uniform()
    }

    /// Standard normal draw at position `index` of `stream`.
    pub fn normal(&self, stream: u64, index: u64) -> f64 {
        norm_inv(self.uniform(stream, index))
    }
}

/// Sequential reader over one stream; `seek(i)` then reading yields the same
/// values as `CounterRng::uniform(stream, i..)`.
#[derive(Debug, Clone)]
pub struct StreamRng {
    rng: ChaCha8Rng,
}

impl StreamRng {
    /// Positions the reader at draw `index` (each draw consumes two 32-bit words).
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(u128::from(index) * 2);
    }

    pub fn next_uniform(&mut self) -> f64 {
        to_open_unit(self.rng.next_u64())
    }

    pub fn next_normal(&mut self) -> f64 {
        norm_inv(self.next_uniform())
    }

    /// Uniform integer in `0..n`.
    pub fn next_index(&mut self, n: usize) -> usize {
        ((self.next_uniform() * n as f64) as usize).min(n - 1)
    }
}

/// Maps 52 random bits to the midpoint grid of (0, 1), never hitting either end.
fn to_open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}
