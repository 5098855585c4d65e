//! Exact floating-point summation.
//!
//! [`ExactSum`] accumulates f64 values into a fixed-point superaccumulator
//! that spans the entire double-precision exponent range: chunk j holds the
//! integer coefficient of 2^(32j − 1074). Every `add` is exact integer
//! arithmetic, so the accumulated value is the true real-number sum no matter
//! how many terms are added or in which order, and [`ExactSum::value`]
//! rounds that real number to the nearest f64 once.
//!
//! Consequences the simulator relies on:
//!
//! - permuting particles leaves empirical means bit-identical,
//! - splitting a reduction across workers and merging partial accumulators
//!   gives the same bits as a sequential sum,
//! - catastrophic cancellation cannot occur.
//!
//! Capacity: each add deposits at most 2^85 into a chunk, so ~2^42 adds are
//! safe between extractions; far beyond any reduction in this crate.

const CHUNKS: usize = 64;
/// Exponent of the least significant accumulator bit (smallest subnormal).
const BASE_EXP: i32 = -1074;
const RADIX: i128 = 1 << 32;

/// Exact superaccumulator for f64 sums.
#[derive(Clone)]
pub struct ExactSum {
    chunks: [i128; CHUNKS],
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

impl ExactSum {
    pub fn new() -> Self {
        ExactSum {
            chunks: [0; CHUNKS],
        }
    }

    /// Add one finite value. Panics on NaN or infinity: non-finite inputs
    /// indicate an upstream divergence that must not be absorbed silently.
    #[inline]
    pub fn add(&mut self, v: f64) {
        assert!(v.is_finite(), "ExactSum::add received non-finite value {v}");
        let bits = v.to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & 0x000f_ffff_ffff_ffff;
        let (mantissa, exp) = if raw_exp == 0 {
            (frac, BASE_EXP) // subnormal (or zero)
        } else {
            (frac | (1 << 52), raw_exp - 1075)
        };
        if mantissa == 0 {
            return;
        }
        let pos = (exp - BASE_EXP) as usize;
        let (j, r) = (pos >> 5, pos & 31);
        let part = (mantissa as i128) << r;
        self.chunks[j] += if bits >> 63 == 1 { -part } else { part };
    }

    /// Fold another accumulator into this one (exact, commutative).
    pub fn merge(&mut self, other: &ExactSum) {
        for (a, b) in self.chunks.iter_mut().zip(other.chunks.iter()) {
            *a += b;
        }
    }

    pub fn clear(&mut self) {
        self.chunks = [0; CHUNKS];
    }

    /// The accumulated sum, correctly rounded to the nearest f64
    /// (ties to even).
    pub fn value(&self) -> f64 {
        // Normalize to base-2^32 digits in [0, 2^32); two's-complement style,
        // so a final carry of -1 flags a negative total.
        const LIMBS: usize = CHUNKS + 4;
        let mut digits = [0u64; LIMBS];
        let mut carry: i128 = 0;
        for j in 0..LIMBS {
            let t = if j < CHUNKS {
                self.chunks[j] + carry
            } else {
                carry
            };
            let d = t.rem_euclid(RADIX);
            digits[j] = d as u64;
            carry = (t - d) >> 32;
        }
        debug_assert!(carry == 0 || carry == -1, "accumulator overflow");
        let negative = carry == -1;
        if negative {
            // magnitude = 2^(32*LIMBS) - value  (bitwise NOT plus one)
            let mut borrow = 1u64;
            for d in digits.iter_mut() {
                let nd = (!*d & 0xffff_ffff) + borrow;
                *d = nd & 0xffff_ffff;
                borrow = nd >> 32;
            }
        }

        let Some(top) = digits.iter().rposition(|&d| d != 0) else {
            return 0.0;
        };
        // Total bit length of the magnitude.
        let len = 32 * top + (64 - digits[top].leading_zeros() as usize);

        if len <= 53 {
            // Fits exactly: at most limbs 0 and 1 are populated.
            let m = digits[0] | (digits[1] << 32);
            return apply_sign(m as f64 * pow2(BASE_EXP), negative);
        }

        // Assemble a window of the leading bits (up to 96), wide enough to
        // contain the 54 rounding-relevant bits.
        let base = top.saturating_sub(2);
        let mut window: u128 = 0;
        for j in (base..=top).rev() {
            window = (window << 32) | u128::from(digits[j]);
        }
        let wlen = len - 32 * base;
        let cut = wlen - 54;
        let mut m54 = (window >> cut) as u64;
        let sticky = (window & ((1u128 << cut) - 1)) != 0 || digits[..base].iter().any(|&d| d != 0);
        // Round to nearest even on the 53-bit result.
        let round_bit = m54 & 1;
        m54 >>= 1;
        if round_bit == 1 && (sticky || m54 & 1 == 1) {
            m54 += 1;
        }
        let e = BASE_EXP + (32 * base + cut + 1) as i32;
        apply_sign(m54 as f64 * pow2(e), negative)
    }
}

#[inline]
fn apply_sign(v: f64, negative: bool) -> f64 {
    if negative {
        -v
    } else {
        v
    }
}

/// Exact 2^e for any e representable in f64 (including subnormals).
fn pow2(e: i32) -> f64 {
    if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (e - BASE_EXP))
    }
}

/// Exact sum of a slice (convenience wrapper).
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut acc = ExactSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(ExactSum::new().value(), 0.0);
    }

    #[test]
    fn single_values_round_trip() {
        for v in [
            0.0,
            1.0,
            -1.0,
            0.1,
            1e300,
            -1e300,
            1e-300,
            5e-324,
            f64::MIN_POSITIVE,
            123456.78901234567,
            2f64.powi(1023),
            -(2f64.powi(-1074)),
        ] {
            assert_eq!(exact_sum(&[v]).to_bits(), v.to_bits(), "round trip of {v}");
        }
        // The integer accumulator has a single zero: -0.0 comes back as +0.0,
        // like any sum that cancels exactly.
        assert_eq!(exact_sum(&[-0.0]), 0.0);
        assert!(exact_sum(&[-0.0]).is_sign_positive());
    }

    #[test]
    fn catastrophic_cancellation_is_exact() {
        assert_eq!(exact_sum(&[1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum(&[2f64.powi(53), 1.0, -(2f64.powi(53))]), 1.0);
        assert_eq!(exact_sum(&[1e308, -1e308, 1e-308, -1e-308]), 0.0);
    }

    #[test]
    fn rounds_to_nearest_even() {
        // 2^53 + 1 is not representable; the sum must round to 2^53 (even).
        assert_eq!(exact_sum(&[2f64.powi(53), 1.0]), 2f64.powi(53));
        // 2^53 + 2 is representable.
        assert_eq!(exact_sum(&[2f64.powi(53), 2.0]), 2f64.powi(53) + 2.0);
        // 2^53 + 1.5 rounds up to 2^53 + 2.
        assert_eq!(exact_sum(&[2f64.powi(53), 1.5]), 2f64.powi(53) + 2.0);
    }

    #[test]
    fn merge_equals_sequential() {
        let values: Vec<f64> = (0..1000)
            .map(|i| ((i * 2654435761u64 % 1000) as f64 - 500.0) * 1e-3)
            .collect();
        let mut a = ExactSum::new();
        let mut b = ExactSum::new();
        for (i, &v) in values.iter().enumerate() {
            if i % 2 == 0 {
                a.add(v);
            } else {
                b.add(v);
            }
        }
        a.merge(&b);
        assert_eq!(a.value().to_bits(), exact_sum(&values).to_bits());
    }

    proptest! {
        #[test]
        fn integer_scaled_sums_match_i128_oracle(
            ks in proptest::collection::vec(-1_000_000i64..1_000_000, 1..200),
            es in proptest::collection::vec(-30i32..30, 1..200),
        ) {
            let n = ks.len().min(es.len());
            // Values k * 2^e have an exact i128 representation at scale 2^-30.
            let values: Vec<f64> = (0..n).map(|i| ks[i] as f64 * pow2(es[i])).collect();
            let oracle: i128 = (0..n)
                .map(|i| (ks[i] as i128) << (es[i] + 30))
                .sum();
            let expected = oracle as f64 * pow2(-30);
            prop_assert_eq!(exact_sum(&values).to_bits(), expected.to_bits());
        }

        #[test]
        fn permutation_invariance(
            mut values in proptest::collection::vec(
                prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()),
                            -1e3f64..1e3],
                1..100),
            seed in any::<u64>(),
        ) {
            let forward = exact_sum(&values);
            // Deterministic shuffle.
            let mut s = seed;
            for i in (1..values.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                values.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(forward.to_bits(), exact_sum(&values).to_bits());
        }
    }
}
