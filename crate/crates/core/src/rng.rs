//! Portable seeded random streams.
//!
//! Streams are ChaCha20 (`rand_chacha::ChaCha20Rng`) keyed by
//! `seed_from_u64(seed)` with the ChaCha stream id set to the replication
//! index, so replication `r` of seed `s` is the same sequence regardless of
//! which thread produces it. Uniforms take the top 53 bits of each 64-bit
//! output, `u = (bits + 0.5) / 2⁵³ ∈ (0, 1)`, and standard normals are
//! `Φ⁻¹(u)`.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

/// Seeded source of uniform and standard normal variates.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha20Rng,
    normal: Normal,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            normal: Normal::standard(),
        }
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u = self.uniform();
        self.normal.inverse_cdf(u)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_in(&mut self, lo: usize, hi: usize) -> usize {
        let span = (hi - lo + 1) as f64;
        lo + ((self.uniform() * span) as usize).min(hi - lo)
    }
}
