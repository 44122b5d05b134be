//! Error-correcting codes that map indices in `[0, n)` to binary words.
//!
//! [`Codebook`] wraps any [`IndexCode`] and caches the codeword of every
//! index, so the per-bit masks used during recovery are table lookups.

mod bch;
mod gf;

use std::fmt;
use std::sync::Arc;

pub use bch::BchCode;

use crate::error::{check_index, Error, Result};

/// Largest supported codeword length.
pub const MAX_CODEWORD_LEN: usize = 256;

/// Default minimum relative decoding radius.
pub const DEFAULT_MIN_LAMBDA: f64 = 0.15;

/// A binary word of at most [`MAX_CODEWORD_LEN`] bits, bit 0 first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CodeWord {
    len: usize,
    bits: [u64; 4],
}

impl CodeWord {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_CODEWORD_LEN, "codeword length {len} too large");
        Self { len, bits: [0; 4] }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut w = Self::zeros(bits.len());
        for (l, &b) in bits.iter().enumerate() {
            w.set(l, b);
        }
        w
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, l: usize) -> bool {
        debug_assert!(l < self.len);
        self.bits[l >> 6] >> (l & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, l: usize, value: bool) {
        assert!(l < self.len, "bit {l} out of range for length {}", self.len);
        let mask = 1u64 << (l & 63);
        if value {
            self.bits[l >> 6] |= mask;
        } else {
            self.bits[l >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, l: usize) {
        assert!(l < self.len, "bit {l} out of range for length {}", self.len);
        self.bits[l >> 6] ^= 1u64 << (l & 63);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn xor_assign(&mut self, other: &CodeWord) {
        for (a, b) in self.bits.iter_mut().zip(other.bits) {
            *a ^= b;
        }
    }

    pub fn distance(&self, other: &CodeWord) -> usize {
        self.bits
            .iter()
            .zip(other.bits)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Positions of set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&l| self.get(l))
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.len).map(|l| self.get(l)).collect()
    }
}

impl fmt::Debug for CodeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len).map(|l| if self.get(l) { '1' } else { '0' }).collect();
        write!(f, "CodeWord({s})")
    }
}

/// A code over the index space `[0, n)`.
///
/// `decode` returns `None` rather than guessing when the word is not within
/// `max_errors` flips of a valid index codeword.
pub trait IndexCode: Send + Sync + fmt::Debug {
    fn index_space(&self) -> usize;
    fn len(&self) -> usize;
    fn max_errors(&self) -> usize;
    fn encode(&self, i: usize) -> CodeWord;
    fn decode(&self, w: &CodeWord) -> Option<usize>;
    fn describe(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct Codebook {
    code: Arc<dyn IndexCode>,
    table: Vec<CodeWord>,
}

impl Codebook {
    /// Shortest BCH code for `[0, n)` with relative radius at least
    /// [`DEFAULT_MIN_LAMBDA`].
    pub fn for_indices(n: usize) -> Result<Self> {
        Self::for_indices_with_lambda(n, DEFAULT_MIN_LAMBDA)
    }

    pub fn for_indices_with_lambda(n: usize, min_lambda: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("codebook needs at least 2 indices, got {n}")));
        }
        if !(min_lambda > 0.0 && min_lambda < 0.5) {
            return Err(Error::Parameter(format!("lambda must lie in (0, 0.5), got {min_lambda}")));
        }
        Ok(Self::from_code(Arc::new(BchCode::select(n, min_lambda)?)))
    }

    pub fn from_code(code: Arc<dyn IndexCode>) -> Self {
        let table = (0..code.index_space()).map(|i| code.encode(i)).collect();
        Self { code, table }
    }

    pub fn code(&self) -> &dyn IndexCode {
        self.code.as_ref()
    }

    /// Number of indices covered.
    pub fn n(&self) -> usize {
        self.table.len()
    }

    pub fn codeword_len(&self) -> usize {
        self.code.len()
    }

    /// Guaranteed number of correctable bit errors.
    pub fn max_errors(&self) -> usize {
        self.code.max_errors()
    }

    /// Relative decoding radius.
    pub fn lambda(&self) -> f64 {
        self.max_errors() as f64 / self.codeword_len() as f64
    }

    pub fn encode(&self, i: usize) -> Result<&CodeWord> {
        check_index("index", i, self.n())?;
        Ok(&self.table[i])
    }

    pub fn decode(&self, w: &CodeWord) -> Result<Option<usize>> {
        if w.len() != self.codeword_len() {
            return Err(Error::Dimension(format!(
                "word has {} bits, code length is {}",
                w.len(),
                self.codeword_len()
            )));
        }
        Ok(self.code.decode(w))
    }

    pub fn mask_bit(&self, l: usize, i: usize) -> Result<bool> {
        check_index("code bit", l, self.codeword_len())?;
        check_index("index", i, self.n())?;
        Ok(self.table[i].get(l))
    }

    /// Unchecked variant of [`Codebook::mask_bit`] for inner loops.
    #[inline]
    pub(crate) fn bit(&self, l: usize, i: usize) -> bool {
        self.table[i].get(l)
    }

    pub fn describe(&self) -> String {
        self.code.describe()
    }
}
