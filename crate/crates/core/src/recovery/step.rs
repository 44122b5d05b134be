//! Thresholding masked buckets into code words and decoding index pairs.

use crate::cartesian::{cart_masked_diag, BucketMatrix, CartesianTransform};
use crate::ecc::{CodeWord, Codebook};
use crate::error::{Error, Result};

use super::approximate::MaskedBucketSet;

/// What to subtract from each masked bucket before thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Baseline {
    /// The sketch of the masked identity, cancelling the unit diagonal of a
    /// correlation matrix.
    #[default]
    UnitDiagonal,
    /// Nothing; used when the diagonal has already cancelled, as in
    /// differences of two estimates.
    None,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    /// Ordered pairs, one per bucket that decoded on both sides.
    pub pairs: Vec<(usize, usize)>,
    /// Buckets whose two words were both all-zero.
    pub empty_buckets: usize,
    /// Buckets with a nonzero word where either side failed to decode.
    pub decode_failures: usize,
    /// Buckets that decoded to the same index on both sides.
    pub diagonal_hits: usize,
}

pub fn recovery_step(
    buckets: &MaskedBucketSet,
    t: &CartesianTransform,
    cb: &Codebook,
    phi: f64,
    baseline: Baseline,
) -> Result<StepOutput> {
    let len = cb.codeword_len();
    let pi = t.pi();
    if buckets.left.len() != len || buckets.right.len() != len {
        return Err(Error::Dimension(format!(
            "{} / {} masked buckets for a code of length {len}",
            buckets.left.len(),
            buckets.right.len()
        )));
    }
    if buckets.left.iter().chain(&buckets.right).any(|m| m.pi() != pi) {
        return Err(Error::Dimension(format!("masked buckets are not {pi} x {pi}")));
    }
    let base: Vec<BucketMatrix> = match baseline {
        Baseline::UnitDiagonal => (0..len).map(|l| cart_masked_diag(t, cb, l)).collect::<Result<_>>()?,
        Baseline::None => vec![BucketMatrix::zeros(pi); len],
    };
    let threshold = phi / 2.0;
    let mut out = StepOutput::default();
    for h in 0..pi {
        for g in 0..pi {
            let mut row_word = CodeWord::zeros(len);
            let mut col_word = CodeWord::zeros(len);
            for l in 0..len {
                let b = base[l].get(h, g);
                if (buckets.left[l].get(h, g) - b).abs() >= threshold {
                    row_word.set(l, true);
                }
                if (buckets.right[l].get(h, g) - b).abs() >= threshold {
                    col_word.set(l, true);
                }
            }
            if row_word.count_ones() == 0 && col_word.count_ones() == 0 {
                out.empty_buckets += 1;
                continue;
            }
            match (cb.decode(&row_word)?, cb.decode(&col_word)?) {
                (Some(i), Some(j)) if i != j => out.pairs.push((i, j)),
                (Some(_), Some(_)) => out.diagonal_hits += 1,
                _ => out.decode_failures += 1,
            }
        }
    }
    Ok(out)
}
