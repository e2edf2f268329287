//! Deterministic pseudo-random number generation.
//!
//! A self-contained SplitMix64 generator so that weight initialization and
//! dataset synthesis are bit-reproducible across platforms and independent of
//! any third-party crate's sampling internals. The same seed always yields the
//! same stream.

/// SplitMix64 pseudo-random generator.
///
/// Sequence defined by Steele, Lea & Flood's `splitmix64`: the state advances
/// by the golden-ratio increment and each output is a finalizing bit mix of
/// the new state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    /// Creates a generator whose stream is fully determined by `seed`.
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Returns the next 64-bit value in the stream.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Returns a uniform sample from `[0, 1)` with 53 bits of precision.
    pub fn next_uniform(&mut self) -> f64 {
        // Top 53 bits scaled by 2^-53: every result is an exact multiple of
        // 2^-53, so the value 1.0 itself is never produced.
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Returns a uniform sample from `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }
}
