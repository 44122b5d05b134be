//! Degree-3 polynomial hashing over GF(2^61 - 1).
//!
//! Four random coefficients give a 4-wise independent family, which covers
//! the pairwise independence needed for bucket and sign functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MERSENNE_61: u64 = (1 << 61) - 1;

#[inline]
fn reduce(x: u128) -> u64 {
    let lo = (x as u64) & MERSENNE_61;
    let hi = (x >> 61) as u64;
    let mut r = lo + (hi & MERSENNE_61) + (hi >> 61);
    while r >= MERSENNE_61 {
        r -= MERSENNE_61;
    }
    r
}

#[inline]
fn mul_mod(a: u64, b: u64) -> u64 {
    reduce(a as u128 * b as u128)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct PolyHash {
    coeffs: [u64; 4],
}

impl PolyHash {
    pub(crate) fn from_rng(rng: &mut ChaCha8Rng) -> Self {
        let mut coeffs = [0u64; 4];
        for c in coeffs.iter_mut() {
            *c = rng.random_range(0..MERSENNE_61);
        }
        // Keep the leading coefficient nonzero so the degree is exactly 3.
        if coeffs[3] == 0 {
            coeffs[3] = 1;
        }
        Self { coeffs }
    }

    #[inline]
    pub(crate) fn eval(&self, x: u64) -> u64 {
        let x = x % MERSENNE_61;
        let [c0, c1, c2, c3] = self.coeffs;
        let mut acc = c3;
        acc = reduce(mul_mod(acc, x) as u128 + c2 as u128);
        acc = reduce(mul_mod(acc, x) as u128 + c1 as u128);
        reduce(mul_mod(acc, x) as u128 + c0 as u128)
    }

    #[inline]
    pub(crate) fn bucket(&self, x: u64, buckets: usize) -> usize {
        (self.eval(x) % buckets as u64) as usize
    }

    #[inline]
    pub(crate) fn sign(&self, x: u64) -> f64 {
        if self.eval(x) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Deterministic RNG for a `(seed, stream)` pair.
pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser, used to derive independent child seeds.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
