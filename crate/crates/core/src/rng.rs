//! Counter-based random-number streams.
//!
//! Every random quantity in the toolkit is a pure function of
//! (seed, stream_id, step index). A stream is realized with the Philox4x32-10
//! block cipher: the 64-bit seed is the key, the 64-bit stream id fills the
//! low counter words and the draw index the high ones. One block yields 128
//! random bits, enough for one uniform pair and hence one Box–Muller normal
//! pair.
//!
//! Because streams are stateless, particle updates can be evaluated in any
//! order and on any number of workers without changing a single bit of the
//! output, and two coupled systems can consume the *same* Brownian increments
//! by construction (same seed and stream id).

/// Philox multiplication constants.
const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
/// Philox Weyl key-schedule constants.
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// One Philox4x32 S-P round.
#[inline(always)]
fn philox_round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let p0 = u64::from(PHILOX_M0) * u64::from(ctr[0]);
    let p1 = u64::from(PHILOX_M1) * u64::from(ctr[2]);
    [
        ((p1 >> 32) as u32) ^ ctr[1] ^ key[0],
        p1 as u32,
        ((p0 >> 32) as u32) ^ ctr[3] ^ key[1],
        p0 as u32,
    ]
}

/// The full 10-round Philox4x32 block function.
#[inline]
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    ctr = philox_round(ctr, key);
    for _ in 1..10 {
        key[0] = key[0].wrapping_add(PHILOX_W0);
        key[1] = key[1].wrapping_add(PHILOX_W1);
        ctr = philox_round(ctr, key);
    }
    ctr
}

/// A reproducible stream of standard-normal (and uniform) draws.
///
/// Streams are cheap value types; copy them freely. Distinct `stream_id`s
/// under the same seed give statistically independent sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

/// Draw index reserved for initial-condition sampling, far beyond any
/// reachable step count.
pub const IC_DRAW: u64 = u64::MAX;

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// The raw 128-bit block for draw index `k`.
    #[inline]
    fn block(&self, k: u64) -> [u32; 4] {
        let ctr = [
            self.stream_id as u32,
            (self.stream_id >> 32) as u32,
            k as u32,
            (k >> 32) as u32,
        ];
        let key = [self.seed as u32, (self.seed >> 32) as u32];
        philox4x32_10(ctr, key)
    }

    /// Two independent uniforms from block `k`: the first in (0, 1] (safe to
    /// pass to `ln`), the second in [0, 1).
    #[inline]
    fn uniform_pair(&self, k: u64) -> (f64, f64) {
        let b = self.block(k);
        let w0 = u64::from(b[0]) | (u64::from(b[1]) << 32);
        let w1 = u64::from(b[2]) | (u64::from(b[3]) << 32);
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (((w0 >> 11) + 1) as f64 * SCALE, (w1 >> 11) as f64 * SCALE)
    }

    /// Uniform draw in [0, 1) for index `k`.
    #[inline]
    pub fn uniform(&self, k: u64) -> f64 {
        let b = self.block(k);
        let w = u64::from(b[0]) | (u64::from(b[1]) << 32);
        (w >> 11) as f64 / (1u64 << 53) as f64
    }

    /// A standard-normal pair for index `k` (Box–Muller).
    #[inline]
    pub fn normal_pair(&self, k: u64) -> (f64, f64) {
        let (u1, u2) = self.uniform_pair(k);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    /// The `k`-th standard normal draw of the stream.
    ///
    /// Deterministic in (seed, stream_id, k); draws with distinct `k` are
    /// independent because each consumes its own cipher block.
    #[inline]
    pub fn normal(&self, k: u64) -> f64 {
        self.normal_pair(k).0
    }
}
