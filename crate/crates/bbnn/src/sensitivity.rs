//! Activation sensitivity: which bit flips of an argument can change the
//! row activation `Z = A(A, B)`.
//!
//! Raising a dead row (`Z_i = 0`) needs *any* one of the candidate bits,
//! while silencing a live row (`Z_i = 1`) needs *all* of its active
//! conjuncts cleared. The closed forms below follow directly:
//!
//! - positive: row i of `S⁺` is `B_i` where `Z_i = 0`, else zero (on a dead
//!   row every `B_ij = 1` has `A_ij = 0`, and setting that `A_ij` fires it);
//! - negative: row i of `S⁻` is `A_i ∧ B_i` where `Z_i = 1`, else zero;
//! - specialized `S*`: the positive rows as-is, and a negative row only
//!   when it has exactly one active conjunct (a single flip suffices).
//!
//! The flip-and-reevaluate semantics live only in [`crate::oracle`], which
//! the test suites use to cross-check these word-parallel forms.

use crate::bits::{broadcast_shape, words, BitMatrix, BitVector, Operand};
use crate::Result;

/// Positive and negative sensitivity of one application, computed together.
/// The two matrices are rowwise disjoint: a row is nonzero in at most one
/// of them, depending on the activation bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensitivityPair {
    pub positive: BitMatrix,
    pub negative: BitMatrix,
}

pub fn sensitivity_pair<'a>(
    a: impl Into<Operand<'a>>,
    b: impl Into<Operand<'a>>,
) -> Result<SensitivityPair> {
    let (a, b) = (a.into(), b.into());
    let (rows, cols) = broadcast_shape(&a, &b)?;
    let mut positive = BitMatrix::zeros(rows, cols);
    let mut negative = BitMatrix::zeros(rows, cols);
    for i in 0..rows {
        let (aw, bw) = (a.row_words(i), b.row_words(i));
        if words::and_any(aw, bw) {
            let mut row = BitVector::zeros(cols);
            row.and_or_assign_words(aw, bw);
            negative.set_row(i, &row);
        } else {
            let mut row = BitVector::zeros(cols);
            row.or_assign_words(bw);
            positive.set_row(i, &row);
        }
    }
    Ok(SensitivityPair { positive, negative })
}

/// `S⁺(A, B)`: bits whose 0→1 flip in `A` raises a dead activation.
pub fn pos_sensitivity<'a>(
    a: impl Into<Operand<'a>>,
    b: impl Into<Operand<'a>>,
) -> Result<BitMatrix> {
    Ok(sensitivity_pair(a, b)?.positive)
}

/// `S⁻(A, B)`: active conjuncts that must all be cleared to silence a live
/// activation.
pub fn neg_sensitivity<'a>(
    a: impl Into<Operand<'a>>,
    b: impl Into<Operand<'a>>,
) -> Result<BitMatrix> {
    Ok(sensitivity_pair(a, b)?.negative)
}

/// `S(A, B) = S⁺ ∨ S⁻`.
pub fn full_sensitivity<'a>(
    a: impl Into<Operand<'a>>,
    b: impl Into<Operand<'a>>,
) -> Result<BitMatrix> {
    let pair = sensitivity_pair(a, b)?;
    Ok(pair.positive.xor(&pair.negative)) // disjoint rows, so XOR == OR
}

/// `S*(A, B)`: bits whose single flip alone changes the activation. Live
/// rows survive only when they have exactly one active conjunct.
pub fn specialized_sensitivity<'a>(
    a: impl Into<Operand<'a>>,
    b: impl Into<Operand<'a>>,
) -> Result<BitMatrix> {
    let (a, b) = (a.into(), b.into());
    let (rows, cols) = broadcast_shape(&a, &b)?;
    let mut s = BitMatrix::zeros(rows, cols);
    let mut row = BitVector::zeros(cols);
    for i in 0..rows {
        let (aw, bw) = (a.row_words(i), b.row_words(i));
        row.words_mut().fill(0);
        if specialized_row_into(&mut row, aw, bw) {
            s.set_row(i, &row);
        }
    }
    Ok(s)
}

/// Writes the `S*` row for one `(a_row, b_row)` pair into `out` (assumed
/// zeroed) and reports whether it is nonzero. Used by the training loops to
/// avoid materializing whole per-sample sensitivity matrices.
pub(crate) fn specialized_row_into(out: &mut BitVector, a_row: &[u64], b_row: &[u64]) -> bool {
    match words::and_count(a_row, b_row) {
        0 => {
            out.or_assign_words(b_row);
            out.any()
        }
        1 => {
            out.and_or_assign_words(a_row, b_row);
            true
        }
        _ => false,
    }
}

/// Selection expansion: one one-hot row per set bit of `s`, ascending by
/// bit index, so that the OR of the rows reproduces `s`.
pub fn selection_expansion(s: &BitVector) -> BitMatrix {
    let mut m = BitMatrix::zeros(s.count_ones(), s.len());
    for (row, bit) in s.iter_ones().enumerate() {
        m.set(row, bit, true);
    }
    m
}
