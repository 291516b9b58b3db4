//! Counter-based splittable random streams.
//!
//! Every stochastic routine in the crate draws from an explicit [`RngStream`]
//! identified by `(seed, stream_id)`.  The `k`-th output is a bit-mix of
//! `key + k * GOLDEN` where `key` is derived from seed and stream id, so a
//! stream is a pure function of its three fields: draws can be reproduced
//! without replaying earlier ones, and distinct stream ids yield
//! decorrelated sequences.  Parallel callers get one stream per work item
//! via [`RngStream::split`] and never share mutable state.

use super::special::std_normal_quantile;

/// 2^64 / phi; the SplitMix64 increment.
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const STREAM_SALT: u64 = 0x517c_c1b7_2722_0a95;
const SPLIT_SALT: u64 = 0xd6e8_feb8_6659_fd93;

/// SplitMix64 finalizer; a bijective avalanche mix on 64 bits.
fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic random stream; cheap to clone, never implicitly copied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
    /// Number of 64-bit draws made so far.
    pub counter: u64,
    key: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let key = mix(mix(seed) ^ mix(stream_id ^ STREAM_SALT).rotate_left(32));
        RngStream {
            seed,
            stream_id,
            counter: 0,
            key,
        }
    }

    /// Child stream with an id derived from this stream's id and `tag`.
    /// Splitting is position-independent: it does not consume draws.
    pub fn split(&self, tag: u64) -> RngStream {
        let child = mix(self.stream_id.wrapping_mul(GOLDEN) ^ mix(tag ^ SPLIT_SALT));
        RngStream::new(self.seed, child)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * 1.1102230246251565e-16
    }

    /// Uniform draw in the open interval `(0, 1)`.
    fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * 1.1102230246251565e-16
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Standard normal via the inverse CDF of an open-interval uniform.
    pub fn std_normal(&mut self) -> f64 {
        let u = self.open01();
        // The open interval keeps u strictly inside the quantile's domain.
        std_normal_quantile(u).expect("open01 lies in (0,1)")
    }

    /// Unit-rate exponential draw.
    pub fn exponential(&mut self) -> f64 {
        -(-self.uniform01()).ln_1p()
    }

    /// Uniform integer in `[0, n)`; rejection keeps the draw unbiased.
    pub fn u64_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "u64_below needs n > 0");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.u64_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
