//! Seeded random streams.
//!
//! Every stream is a xoshiro256++ generator whose 256-bit state is expanded
//! from a 64-bit key with SplitMix64 (increment `0x9E3779B97F4A7C15`, output
//! mixers `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`). A key is derived
//! from `(seed, stream index)` by one more SplitMix64 step, so separate calls
//! never share state and any stream can be regenerated in isolation.
//!
//! Uniforms use the top 53 bits: `(next_u64() >> 11) · 2⁻⁵³ ∈ [0, 1)`.
//! Normals use the basic Box-Muller transform on `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)`,
//! returning both `r·cos(2πu2)` and `r·sin(2πu2)` before drawing again.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// A portable random stream with uniform and Box-Muller normal draws.
#[derive(Clone, Debug)]
pub struct Stream {
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn from_seed(seed: u64) -> Self {
        Stream {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Independent stream number `index` under `seed`.
    pub fn derive(seed: u64, index: u64) -> Self {
        let mut mixer =
            SplitMix64::seed_from_u64(seed ^ index.wrapping_mul(GOLDEN).rotate_left(17));
        Stream::from_seed(mixer.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}
