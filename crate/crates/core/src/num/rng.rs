//! Counter-based deterministic random streams.
//!
//! A stream is the pure function `(seed, stream_id, counter) -> u64`
//! realized as a SplitMix64 walk: the stream start is
//! `mix64(seed) + mix64(stream_id ^ STREAM_SALT)` and output `i` is
//! `mix64(start + i * GOLDEN)`. Every value is random-access, so path
//! simulation can hand out independent substreams without locks, and the
//! same `(seed, stream_id)` replays bit-identically.
//!
//! Normal variates use the inverse-CDF transform
//! (`special::norm_quantile`) on one open-interval uniform each. This
//! choice is frozen for the life of the crate; golden tests depend on it.

use super::special::norm_quantile;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_SALT: u64 = 0x5851_F42D_4C95_7F2D;

/// SplitMix64 finalizer (Stafford mix 13).
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seeded, counter-addressed random stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
    start: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream {
            seed,
            stream_id,
            counter: 0,
            start: mix64(seed).wrapping_add(mix64(stream_id ^ STREAM_SALT)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.start.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter += 1;
        v
    }

    /// Uniform on the open interval (0, 1): `(x >> 11 + 0.5) * 2^-53`,
    /// never exactly 0 or 1 so it is safe to feed the quantile function.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// One standard normal variate (inverse-CDF transform).
    pub fn normal(&mut self) -> f64 {
        norm_quantile(self.uniform())
    }

    /// `n` standard normal variates.
    pub fn gaussian(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// Uniform index in `0..n` via the 64x64->128 multiply reduction.
    /// The modulo bias is at most n / 2^64 and ignored.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform on [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}
