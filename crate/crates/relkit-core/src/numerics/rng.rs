//! Counter-based pseudo-random stream with Box–Muller normal sampling.
//!
//! Every draw is a pure function of `(seed, counter)`, so sequences are
//! reproducible bit-for-bit across platforms and runs, and sub-streams can
//! be derived statelessly for parallel or resumable work.

use super::Scalar;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a well-mixed permutation of a 64-bit word.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded stream of uniforms and normals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, counter: 0 }
    }

    /// Restore a stream at an exact position (checkpoint resume).
    pub fn from_state(seed: u64, counter: u64) -> Self {
        RngStream { seed, counter }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Independent sub-stream `index` of this stream. Derivation is a pure
    /// function of `(seed, index)`; the parent stream is not advanced.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream::new(mix(
            self.seed ^ mix(index.wrapping_add(1).wrapping_mul(GOLDEN))
        ))
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = mix(self
            .seed
            .wrapping_add(self.counter.wrapping_mul(GOLDEN))
            .wrapping_add(GOLDEN));
        self.counter += 1;
        v
    }

    /// Uniform draw in the half-open interval (0, 1].
    pub fn next_uniform(&mut self) -> f64 {
        // 53 mantissa bits; +1 keeps the draw strictly positive for ln().
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via Box–Muller. Consumes two uniforms and keeps
    /// only the cosine branch so each draw maps to a fixed counter pair.
    pub fn next_normal<F: Scalar>(&mut self) -> F {
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        F::from_f64_c(radius * (2.0 * std::f64::consts::PI * u2).cos())
    }

    /// `n` standard normal draws.
    pub fn normals<F: Scalar>(&mut self, n: usize) -> Vec<F> {
        (0..n).map(|_| self.next_normal()).collect()
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next_uniform() - f64::EPSILON).max(0.0)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
