//! Naive reference implementations used to cross-check the packed kernels.
//!
//! Everything here evaluates the defining condition literally — per-bit
//! loops, explicit flip-and-reevaluate trials, full subset enumeration — and
//! deliberately shares no code with the optimized modules. The functions are
//! shipped (not test-gated) so the CLI can run randomized cross-checks via
//! its hidden `verify` subcommand.

use crate::bits::{broadcast_shape, BitMatrix, BitVector, Operand};
use crate::{Error, Result};

/// Which sensitivity definition [`flip_sensitivity`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlipKind {
    Positive,
    Negative,
    Specialized,
}

fn materialize(op: &Operand, rows: usize, cols: usize) -> BitMatrix {
    let mut m = BitMatrix::zeros(rows, cols);
    for r in 0..rows {
        match op {
            Operand::Row(v) => {
                for c in 0..cols {
                    m.set(r, c, v.get(c));
                }
            }
            Operand::Matrix(src) => {
                for c in 0..cols {
                    m.set(r, c, src.get(r, c));
                }
            }
        }
    }
    m
}

fn naive_row_or(a: &BitMatrix, b: &BitMatrix, row: usize) -> bool {
    (0..a.cols()).any(|c| a.get(row, c) && b.get(row, c))
}

/// Row activation evaluated with explicit loops over every bit.
pub fn naive_row_activation<'a>(
    x: impl Into<Operand<'a>>,
    w: impl Into<Operand<'a>>,
) -> Result<BitVector> {
    let (x, w) = (x.into(), w.into());
    let (rows, cols) = broadcast_shape(&x, &w)?;
    let xm = materialize(&x, rows, cols);
    let wm = materialize(&w, rows, cols);
    let mut z = BitVector::zeros(rows);
    for i in 0..rows {
        z.set(i, naive_row_or(&xm, &wm, i));
    }
    Ok(z)
}

/// Sensitivity computed by literally performing flips of `A` and
/// re-evaluating the row activation. Intended for small shapes.
pub fn flip_sensitivity<'a>(
    a: impl Into<Operand<'a>>,
    b: impl Into<Operand<'a>>,
    kind: FlipKind,
) -> Result<BitMatrix> {
    let (a, b) = (a.into(), b.into());
    let (rows, cols) = broadcast_shape(&a, &b)?;
    let am = materialize(&a, rows, cols);
    let bm = materialize(&b, rows, cols);
    let mut s = BitMatrix::zeros(rows, cols);
    for i in 0..rows {
        let z = naive_row_or(&am, &bm, i);
        for j in 0..cols {
            let sensitive = match kind {
                FlipKind::Positive => {
                    // Z must be 0 and setting A_ij := 1 must raise it.
                    if z {
                        false
                    } else {
                        let mut trial = am.clone();
                        trial.set(i, j, true);
                        naive_row_or(&trial, &bm, i)
                    }
                }
                FlipKind::Negative => {
                    // Z must be 1 and keeping A_ij high must sustain it on
                    // its own: clearing every other bit of the row leaves
                    // the activation up, so this bit has to be cleared too.
                    if !z || !am.get(i, j) {
                        false
                    } else {
                        let mut trial = am.clone();
                        for k in 0..cols {
                            trial.set(i, k, k == j);
                        }
                        naive_row_or(&trial, &bm, i)
                    }
                }
                FlipKind::Specialized => {
                    // Toggling A_ij alone changes the activation.
                    let mut trial = am.clone();
                    trial.set(i, j, !am.get(i, j));
                    naive_row_or(&trial, &bm, i) != z
                }
            };
            s.set(i, j, sensitive);
        }
    }
    Ok(s)
}

/// Exhaustive error projection: enumerate all 2^q subsets of the rows of
/// `I`, keep those whose OR never fully covers a row of `C`, and return a
/// maximum-cardinality survivor (lexicographically smallest index set among
/// ties). Returns `None` when no subset at all is feasible, which happens
/// exactly when `C` contains an all-zero row.
pub fn projection_bruteforce(
    c: &BitMatrix,
    i: &BitMatrix,
) -> Result<Option<(BitVector, Vec<usize>)>> {
    const MAX_ROWS: usize = 12;
    let q = i.rows();
    if q > MAX_ROWS {
        return Err(Error::ProjectionTooLarge {
            rows: q,
            limit: MAX_ROWS,
        });
    }
    let cols = if q > 0 { i.cols() } else { c.cols() };
    let mut best: Option<(BitVector, Vec<usize>)> = None;
    for mask in 0u32..1 << q {
        let mut d = BitVector::zeros(cols);
        let mut chosen = Vec::new();
        for row in 0..q {
            if mask >> row & 1 != 0 {
                d.or_assign(&i.row(row));
                chosen.push(row);
            }
        }
        let feasible = (0..c.rows()).all(|r| {
            let cr = c.row(r);
            cr.and(&d) != cr
        });
        if !feasible {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, prev)) => {
                chosen.len() > prev.len() || (chosen.len() == prev.len() && chosen < *prev)
            }
        };
        if better {
            best = Some((d, chosen));
        }
    }
    Ok(best)
}
