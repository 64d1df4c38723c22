//! Deterministic pseudo-random primitives shared across the crate.
//!
//! Everything is keyed by explicit `u64` seeds so that signatures, graph
//! level assignments, and synthetic datasets are reproducible across runs
//! and platforms. The generator is SplitMix64: a Weyl sequence on the
//! golden-ratio increment followed by a 64-bit finalizer.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Bijective on `u64`.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The n-th output of the SplitMix64 stream seeded with `seed`.
///
/// Random access into the stream: `stream_at(seed, n)` equals the value a
/// sequential `SplitMix64::new(seed)` would return on its (n+1)-th call.
pub(crate) fn stream_at(seed: u64, n: u64) -> u64 {
    mix64(seed.wrapping_add(n.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Maps 64 random bits to a double in the open interval (0, 1).
///
/// Uses the top 52 bits plus a half-step offset: every intermediate value
/// is exactly representable, so the result lies in [2^-53, 1 - 2^-53] and
/// neither endpoint rounds to 0.0 or 1.0. (One bit more and the +0.5 at
/// the top of the range would round up to exactly 1.0.)
pub(crate) fn u01_open(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Sequential SplitMix64 generator.
pub(crate) struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub(crate) fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform double in (0, 1).
    pub(crate) fn next_f64(&mut self) -> f64 {
        u01_open(self.next_u64())
    }

    /// Uniform integer in `0..n`. `n` must be nonzero.
    ///
    /// Multiply-shift range reduction; the modulo bias is below 2^-32 for
    /// any `n` that fits in `u32`, which is negligible for data synthesis
    /// and pair sampling.
    pub(crate) fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}
