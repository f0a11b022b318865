//! Seeded, stream-splittable random source.
//!
//! All sampling in this crate draws from a [`StreamRng`], a ChaCha8 generator
//! addressed by a `(seed, stream)` pair. The driver of a Gibbs chain owns
//! stream 0; parallel per-document phases derive one substream per document
//! from the same seed, numbered by a phase counter that advances identically
//! whether or not the work is actually run concurrently. Output therefore
//! depends only on the seed, never on scheduling or worker count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Multiplier mapping a 53-bit draw onto `[0, 1)`.
const F64_SCALE: f64 = 1.0 / 9007199254740992.0;

/// Deterministic random generator with named substreams.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
    seed: u64,
}

impl StreamRng {
    /// Generator for `stream` under `seed`. Stream 0 is conventionally the
    /// driver; substreams derived through [`StreamRng::substream`] never
    /// collide with it.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        StreamRng { inner, seed }
    }

    /// Seed this generator was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for `member` within phase `epoch`, sharing this
    /// generator's seed. Distinct `(epoch, member)` pairs (each below 2^32)
    /// map to distinct nonzero streams, so substreams collide neither with
    /// each other nor with the driver.
    pub fn substream(&self, epoch: u64, member: u64) -> StreamRng {
        debug_assert!(epoch < (1 << 32) - 1 && member < (1 << 32));
        StreamRng::new(self.seed, ((epoch + 1) << 32) | member)
    }

    /// Generator seeded from this generator's next draw, giving an
    /// unrelated stream family. Long-running operations fork the rng they
    /// are handed so their internal substreams cannot collide with the
    /// caller's.
    pub fn fork(&mut self) -> StreamRng {
        // splitmix64 finalizer decorrelates the raw draw from the parent's
        // own output sequence.
        let mut z = self.next_u64().wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        StreamRng::new(z ^ (z >> 31), 0)
    }

    /// Next raw 64-bit draw.
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw from `[0, 1)` with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * F64_SCALE
    }

    /// Uniform draw from `(0, 1]`, safe to pass through `ln`.
    pub fn next_f64_pos(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * F64_SCALE
    }

    /// Bernoulli draw with success probability `p` (clamped to `[0, 1]`).
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Unbiased uniform draw from `0..n`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        if n == 1 {
            return 0;
        }
        // Rejection above the largest multiple of n avoids modulo bias.
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let raw = self.next_u64();
            if raw < zone {
                return raw % n;
            }
        }
    }
}
