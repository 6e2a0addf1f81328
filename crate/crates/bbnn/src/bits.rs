//! Word-packed Boolean vectors and matrices.
//!
//! Bits are stored 64 per `u64` word, least significant bit first, and every
//! matrix row is padded independently to a whole number of words. Pad bits
//! past the logical length are kept at zero by every constructor and
//! operation, so row popcounts and any-nonzero tests never need masking.

use crate::{Error, Result};

pub(crate) const WORD_BITS: usize = 64;

pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// Mask selecting the valid bits of the final word of a `len`-bit payload.
fn tail_mask(len: usize) -> u64 {
    match len % WORD_BITS {
        0 => !0,
        r => (1u64 << r) - 1,
    }
}

/// Word-slice kernels shared by the packed types and the training loops.
/// All slices must have equal length; pad bits are assumed zero.
pub(crate) mod words {
    pub fn and_any(a: &[u64], b: &[u64]) -> bool {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).any(|(x, y)| x & y != 0)
    }

    pub fn and_count(a: &[u64], b: &[u64]) -> usize {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum()
    }

    pub fn count(a: &[u64]) -> usize {
        a.iter().map(|x| x.count_ones() as usize).sum()
    }

    pub fn any(a: &[u64]) -> bool {
        a.iter().any(|&x| x != 0)
    }

    /// True when every set bit of `sub` is also set in `sup`.
    pub fn subset(sub: &[u64], sup: &[u64]) -> bool {
        debug_assert_eq!(sub.len(), sup.len());
        sub.iter().zip(sup).all(|(x, y)| x & !y == 0)
    }

    pub fn or_into(dst: &mut [u64], src: &[u64]) {
        debug_assert_eq!(dst.len(), src.len());
        for (d, s) in dst.iter_mut().zip(src) {
            *d |= s;
        }
    }

    pub fn and_or_into(dst: &mut [u64], a: &[u64], b: &[u64]) {
        debug_assert_eq!(dst.len(), a.len());
        debug_assert_eq!(dst.len(), b.len());
        for ((d, x), y) in dst.iter_mut().zip(a).zip(b) {
            *d |= x & y;
        }
    }

    pub fn and_not_into(dst: &mut [u64], src: &[u64]) {
        debug_assert_eq!(dst.len(), src.len());
        for (d, s) in dst.iter_mut().zip(src) {
            *d &= !s;
        }
    }
}

/// A packed Boolean row vector.
#[derive(Clone, PartialEq, Eq)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut words = vec![!0u64; words_for(len)];
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(len);
        }
        Self { len, words }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
        v
    }

    /// A vector with exactly one set bit.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(index, true);
        v
    }

    /// Each bit independently 1 with probability `density`.
    pub fn random(rng: &mut Rng, len: usize, density: f64) -> Self {
        let mut v = Self::zeros(len);
        fill_random(&mut v.words, len, rng, density);
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, index: usize) -> bool {
        assert!(index < self.len, "bit index {index} out of range {}", self.len);
        self.words[index / WORD_BITS] >> (index % WORD_BITS) & 1 != 0
    }

    pub fn set(&mut self, index: usize, bit: bool) {
        assert!(index < self.len, "bit index {index} out of range {}", self.len);
        let mask = 1u64 << (index % WORD_BITS);
        if bit {
            self.words[index / WORD_BITS] |= mask;
        } else {
            self.words[index / WORD_BITS] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        words::count(&self.words)
    }

    pub fn any(&self) -> bool {
        words::any(&self.words)
    }

    pub fn is_zero(&self) -> bool {
        !self.any()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Indices of set bits, ascending.
    pub fn iter_ones(&self) -> OnesIter<'_> {
        OnesIter {
            words: &self.words,
            word_index: 0,
            current: self.words.first().copied().unwrap_or(0),
        }
    }

    fn check_len(&self, rhs: &Self) -> Result<()> {
        if self.len != rhs.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: rhs.len,
            });
        }
        Ok(())
    }

    pub fn xor(&self, rhs: &Self) -> Self {
        self.binary(rhs, |a, b| a ^ b)
    }

    pub fn and(&self, rhs: &Self) -> Self {
        self.binary(rhs, |a, b| a & b)
    }

    pub fn or(&self, rhs: &Self) -> Self {
        self.binary(rhs, |a, b| a | b)
    }

    pub fn and_not(&self, rhs: &Self) -> Self {
        self.binary(rhs, |a, b| a & !b)
    }

    fn binary(&self, rhs: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        self.check_len(rhs)
            .expect("bit vector operands must have equal length");
        let words = self
            .words
            .iter()
            .zip(&rhs.words)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self { len: self.len, words }
    }

    pub fn xor_assign(&mut self, rhs: &Self) {
        self.assign(rhs, |a, b| a ^ b);
    }

    pub fn and_assign(&mut self, rhs: &Self) {
        self.assign(rhs, |a, b| a & b);
    }

    pub fn or_assign(&mut self, rhs: &Self) {
        self.assign(rhs, |a, b| a | b);
    }

    pub fn and_not_assign(&mut self, rhs: &Self) {
        self.assign(rhs, |a, b| a & !b);
    }

    fn assign(&mut self, rhs: &Self, f: impl Fn(u64, u64) -> u64) {
        self.check_len(rhs)
            .expect("bit vector operands must have equal length");
        for (a, &b) in self.words.iter_mut().zip(&rhs.words) {
            *a = f(*a, b);
        }
    }

    pub(crate) fn or_assign_words(&mut self, src: &[u64]) {
        words::or_into(&mut self.words, src);
    }

    pub(crate) fn and_or_assign_words(&mut self, a: &[u64], b: &[u64]) {
        words::and_or_into(&mut self.words, a, b);
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "bits[")?;
        for i in 0..self.len {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        write!(f, "]")
    }
}

pub struct OnesIter<'a> {
    words: &'a [u64],
    word_index: usize,
    current: u64,
}

impl Iterator for OnesIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        while self.current == 0 {
            self.word_index += 1;
            if self.word_index >= self.words.len() {
                return None;
            }
            self.current = self.words[self.word_index];
        }
        let bit = self.current.trailing_zeros() as usize;
        self.current &= self.current - 1;
        Some(self.word_index * WORD_BITS + bit)
    }
}

/// A packed Boolean matrix with independently padded rows.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    /// Constant-fill constructor. Pad bits stay zero even for a ones fill.
    pub fn filled(rows: usize, cols: usize, fill: bool) -> Result<Self> {
        let words_per_row = words_for(cols);
        let total = rows
            .checked_mul(cols)
            .and_then(|_| rows.checked_mul(words_per_row))
            .ok_or(Error::CapacityOverflow { rows, cols })?;
        let mut m = Self {
            rows,
            cols,
            words_per_row,
            words: vec![0; total],
        };
        if fill {
            let mask = tail_mask(cols);
            for r in 0..rows {
                let row = m.row_words_mut(r);
                for w in row.iter_mut() {
                    *w = !0;
                }
                if let Some(last) = row.last_mut() {
                    *last &= mask;
                }
            }
        }
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, false).expect("matrix dimensions overflow")
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, true).expect("matrix dimensions overflow")
    }

    /// Builds a matrix from row vectors, all of width `cols`.
    pub fn from_rows(cols: usize, rows: &[BitVector]) -> Result<Self> {
        let mut m = Self::zeros(rows.len(), cols);
        for (r, v) in rows.iter().enumerate() {
            if v.len() != cols {
                return Err(Error::ColumnMismatch {
                    left: cols,
                    right: v.len(),
                });
            }
            m.row_words_mut(r).copy_from_slice(v.words());
        }
        Ok(m)
    }

    /// Test helper: row-major bit literal.
    pub fn from_bits(rows: usize, cols: usize, bits: &[bool]) -> Self {
        assert_eq!(bits.len(), rows * cols, "bit literal has wrong length");
        let mut m = Self::zeros(rows, cols);
        for (i, &b) in bits.iter().enumerate() {
            if b {
                m.set(i / cols, i % cols, true);
            }
        }
        m
    }

    /// Each bit independently 1 with probability `density`, drawn row-major.
    pub fn random(rng: &mut Rng, rows: usize, cols: usize, density: f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            let row = &mut m.words[r * m.words_per_row..(r + 1) * m.words_per_row];
            fill_random(row, cols, rng, density);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        assert!(row < self.rows && col < self.cols, "index out of range");
        self.row_words(row)[col / WORD_BITS] >> (col % WORD_BITS) & 1 != 0
    }

    pub fn set(&mut self, row: usize, col: usize, bit: bool) {
        assert!(row < self.rows && col < self.cols, "index out of range");
        let mask = 1u64 << (col % WORD_BITS);
        let w = &mut self.row_words_mut(row)[col / WORD_BITS];
        if bit {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.words[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    fn row_words_mut(&mut self, row: usize) -> &mut [u64] {
        &mut self.words[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    /// Copy of row `row` as a vector.
    pub fn row(&self, row: usize) -> BitVector {
        BitVector {
            len: self.cols,
            words: self.row_words(row).to_vec(),
        }
    }

    pub fn set_row(&mut self, row: usize, v: &BitVector) {
        assert_eq!(v.len(), self.cols, "row width mismatch");
        self.row_words_mut(row).copy_from_slice(v.words());
    }

    pub fn row_any(&self, row: usize) -> bool {
        words::any(self.row_words(row))
    }

    /// Per-row popcounts.
    pub fn popcount_rows(&self) -> Vec<usize> {
        (0..self.rows).map(|r| words::count(self.row_words(r))).collect()
    }

    pub fn count_ones(&self) -> usize {
        words::count(&self.words)
    }

    pub fn is_zero(&self) -> bool {
        !words::any(&self.words)
    }

    /// Stacks `a` above `b`; both must agree on column count.
    pub fn concat_rows(a: &Self, b: &Self) -> Result<Self> {
        if a.cols != b.cols && a.rows != 0 && b.rows != 0 {
            return Err(Error::ColumnMismatch {
                left: a.cols,
                right: b.cols,
            });
        }
        // A zero-row operand adopts the other side's width.
        let cols = if a.rows == 0 && a.cols != b.cols { b.cols } else { a.cols };
        let mut m = Self::zeros(a.rows + b.rows, cols);
        for r in 0..a.rows {
            m.row_words_mut(r).copy_from_slice(a.row_words(r));
        }
        for r in 0..b.rows {
            m.row_words_mut(a.rows + r).copy_from_slice(b.row_words(r));
        }
        Ok(m)
    }

    /// Elementwise XOR against a same-shape matrix.
    pub fn xor(&self, rhs: &Self) -> Self {
        assert!(
            self.rows == rhs.rows && self.cols == rhs.cols,
            "xor operands must have equal shape"
        );
        let words = self
            .words
            .iter()
            .zip(&rhs.words)
            .map(|(&a, &b)| a ^ b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            words_per_row: self.words_per_row,
            words,
        }
    }

    pub(crate) fn raw_words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn raw_words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "bits[{}x{}]", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                write!(f, "{}", u8::from(self.get(r, c)))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn fill_random(row: &mut [u64], cols: usize, rng: &mut Rng, density: f64) {
    // Threshold comparison in u128 keeps density 1.0 exact.
    let threshold = (density.clamp(0.0, 1.0) * 2f64.powi(64)) as u128;
    for (w, base) in row.iter_mut().zip((0..cols).step_by(WORD_BITS)) {
        let nbits = WORD_BITS.min(cols - base);
        let mut word = 0u64;
        for b in 0..nbits {
            if (rng.next_u64() as u128) < threshold {
                word |= 1 << b;
            }
        }
        *w = word;
    }
}

/// Either side of a broadcastable binary operation: a full matrix or a row
/// vector logically repeated across every row. The vector is never copied.
#[derive(Clone, Copy)]
pub enum Operand<'a> {
    Row(&'a BitVector),
    Matrix(&'a BitMatrix),
}

impl<'a> From<&'a BitVector> for Operand<'a> {
    fn from(v: &'a BitVector) -> Self {
        Operand::Row(v)
    }
}

impl<'a> From<&'a BitMatrix> for Operand<'a> {
    fn from(m: &'a BitMatrix) -> Self {
        Operand::Matrix(m)
    }
}

impl<'a> Operand<'a> {
    pub fn rows(&self) -> usize {
        match self {
            Operand::Row(_) => 1,
            Operand::Matrix(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Operand::Row(v) => v.len(),
            Operand::Matrix(m) => m.cols(),
        }
    }

    /// Words of logical row `row`; a row-vector operand serves every index.
    pub(crate) fn row_words(&self, row: usize) -> &'a [u64] {
        match self {
            Operand::Row(v) => v.words(),
            Operand::Matrix(m) => m.row_words(row % m.rows().max(1)),
        }
    }
}

/// Resolves the common shape of two operands, broadcasting a single row
/// against `m` rows. Column counts must always agree.
pub(crate) fn broadcast_shape(a: &Operand, b: &Operand) -> Result<(usize, usize)> {
    let mismatch = Error::ShapeMismatch {
        left_rows: a.rows(),
        left_cols: a.cols(),
        right_rows: b.rows(),
        right_cols: b.cols(),
    };
    if a.cols() != b.cols() {
        return Err(mismatch);
    }
    let rows = match (a.rows(), b.rows()) {
        (x, y) if x == y => x,
        (1, y) => y,
        (x, 1) => x,
        _ => return Err(mismatch),
    };
    Ok((rows, a.cols()))
}

/// Elementwise Boolean operators over broadcast-compatible operands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitOp {
    Xor,
    And,
    Or,
    AndNot,
}

impl BitOp {
    fn apply(self, a: u64, b: u64) -> u64 {
        match self {
            BitOp::Xor => a ^ b,
            BitOp::And => a & b,
            BitOp::Or => a | b,
            BitOp::AndNot => a & !b,
        }
    }
}

/// Elementwise combination of two operands after broadcast.
///
/// `AndNot` computes `a ∧ ¬b`; since pad bits of both sides are zero the
/// complement never leaks past the logical width.
pub fn elementwise<'a>(
    op: BitOp,
    a: impl Into<Operand<'a>>,
    b: impl Into<Operand<'a>>,
) -> Result<BitMatrix> {
    let (a, b) = (a.into(), b.into());
    let (rows, cols) = broadcast_shape(&a, &b)?;
    let mut out = BitMatrix::zeros(rows, cols);
    for r in 0..rows {
        let (aw, bw) = (a.row_words(r), b.row_words(r));
        for (i, w) in out.row_words_mut(r).iter_mut().enumerate() {
            *w = op.apply(aw[i], bw[i]);
        }
    }
    Ok(out)
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic counter-based generator.
///
/// The output sequence is a pure function of `(seed, stream, counter)` in
/// plain u64 arithmetic, so it is identical across platforms and across any
/// parallel schedule. [`Rng::derive`] spawns an independent stream keyed by
/// an arbitrary integer, which is how per-row and per-sample streams are
/// produced during training.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    stream: u64,
    base: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            seed,
            stream,
            base: mix64(seed ^ mix64(stream ^ GOLDEN)),
            counter: 0,
        }
    }

    /// Child generator on an independent stream keyed by `key`.
    pub fn derive(&self, key: u64) -> Self {
        Self::new(self.seed, mix64(self.stream ^ mix64(key.wrapping_add(GOLDEN))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.base.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform value in `0..n`. `n` must be nonzero.
    pub fn next_below(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_below requires a nonzero bound");
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    pub fn next_bool(&mut self, density: f64) -> bool {
        let threshold = (density.clamp(0.0, 1.0) * 2f64.powi(64)) as u128;
        (self.next_u64() as u128) < threshold
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            xs.swap(i, self.next_below(i + 1));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // proptest's prelude re-exports a `Rng` trait; ours wins explicitly.
    use super::Rng;

    fn naive_op(op: BitOp, a: bool, b: bool) -> bool {
        match op {
            BitOp::Xor => a ^ b,
            BitOp::And => a & b,
            BitOp::Or => a | b,
            BitOp::AndNot => a & !b,
        }
    }

    /// Pad bits of every row must read back zero from the raw words.
    fn assert_pads_zero(m: &BitMatrix) {
        for r in 0..m.rows() {
            let row = m.row_words(r);
            let mut masked = row.to_vec();
            if let Some(last) = masked.last_mut() {
                *last &= tail_mask(m.cols());
            }
            assert_eq!(row, &masked[..], "pad bits set in row {r}");
        }
    }

    #[test]
    fn filled_zero_fill() {
        let m = BitMatrix::filled(2, 3, false).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.cols(), 3);
        assert_eq!(m.count_ones(), 0);
    }

    #[test]
    fn filled_ones_keeps_pads_zero_across_word_boundary() {
        let m = BitMatrix::filled(1, 65, true).unwrap();
        assert_eq!(m.popcount_rows(), vec![65]);
        assert_eq!(m.row_words(0).len(), 2);
        assert_eq!(m.row_words(0)[1], 1, "second word must hold exactly one bit");
        assert_pads_zero(&m);
    }

    #[test]
    fn filled_zero_rows_degenerate() {
        let m = BitMatrix::filled(0, 5, false).unwrap();
        assert_eq!(m.rows(), 0);
        assert_eq!(m.popcount_rows(), Vec::<usize>::new());
    }

    #[test]
    fn filled_capacity_overflow_errors() {
        let err = BitMatrix::filled(usize::MAX, 2, false).unwrap_err();
        assert!(matches!(err, Error::CapacityOverflow { .. }));
    }

    #[test]
    fn elementwise_xor_truth_table_row() {
        let a = BitVector::from_bits(&[true, false, true]);
        let b = BitVector::from_bits(&[true, true, false]);
        let out = elementwise(BitOp::Xor, &a, &b).unwrap();
        assert_eq!(out, BitMatrix::from_bits(1, 3, &[false, true, true]));
    }

    #[test]
    fn elementwise_and_broadcasts_row_over_matrix() {
        let v = BitVector::from_bits(&[true, false]);
        let m = BitMatrix::from_bits(2, 2, &[true, true, false, true]);
        let out = elementwise(BitOp::And, &v, &m).unwrap();
        assert_eq!(out, BitMatrix::from_bits(2, 2, &[true, false, false, false]));
    }

    #[test]
    fn elementwise_and_not() {
        let a = BitVector::from_bits(&[true, true, false]);
        let b = BitVector::from_bits(&[false, true, false]);
        let out = elementwise(BitOp::AndNot, &a, &b).unwrap();
        assert_eq!(out, BitMatrix::from_bits(1, 3, &[true, false, false]));
    }

    #[test]
    fn elementwise_rejects_incompatible_shapes() {
        let a = BitMatrix::zeros(2, 3);
        let b = BitMatrix::zeros(3, 3);
        assert!(matches!(
            elementwise(BitOp::Or, &a, &b),
            Err(Error::ShapeMismatch { .. })
        ));
        let c = BitMatrix::zeros(2, 4);
        assert!(matches!(
            elementwise(BitOp::Or, &a, &c),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn popcount_rows_examples() {
        let m = BitMatrix::from_bits(2, 3, &[true, false, true, false, false, false]);
        assert_eq!(m.popcount_rows(), vec![2, 0]);
        assert_eq!(BitMatrix::ones(1, 65).popcount_rows(), vec![65]);
        assert_eq!(BitMatrix::zeros(0, 9).popcount_rows(), Vec::<usize>::new());
    }

    #[test]
    fn concat_rows_stacks_in_order() {
        let a = BitMatrix::from_bits(1, 2, &[true, false]);
        let b = BitMatrix::from_bits(1, 2, &[false, true]);
        let m = BitMatrix::concat_rows(&a, &b).unwrap();
        assert_eq!(m, BitMatrix::from_bits(2, 2, &[true, false, false, true]));

        let empty = BitMatrix::zeros(0, 1);
        let one = BitMatrix::from_bits(1, 1, &[true]);
        assert_eq!(BitMatrix::concat_rows(&empty, &one).unwrap(), one);
        let two = BitMatrix::from_bits(2, 1, &[true, false]);
        assert_eq!(BitMatrix::concat_rows(&two, &empty).unwrap(), two);
    }

    #[test]
    fn concat_rows_rejects_column_mismatch() {
        let a = BitMatrix::zeros(1, 2);
        let b = BitMatrix::zeros(1, 3);
        assert!(matches!(
            BitMatrix::concat_rows(&a, &b),
            Err(Error::ColumnMismatch { .. })
        ));
    }

    #[test]
    fn random_density_extremes() {
        let mut rng = Rng::new(9, 0);
        assert!(BitMatrix::random(&mut rng, 4, 70, 0.0).is_zero());
        let ones = BitMatrix::random(&mut rng, 4, 70, 1.0);
        assert_eq!(ones.count_ones(), 4 * 70);
        assert_pads_zero(&ones);
    }

    #[test]
    fn random_is_deterministic_per_seed_and_stream() {
        let a = BitMatrix::random(&mut Rng::new(1, 0), 4, 4, 0.5);
        let b = BitMatrix::random(&mut Rng::new(1, 0), 4, 4, 0.5);
        assert_eq!(a, b);
        let c = BitMatrix::random(&mut Rng::new(1, 1), 4, 4, 0.5);
        assert_ne!(a, c, "distinct streams should disagree somewhere");
    }

    #[test]
    fn random_mean_density_close_to_requested() {
        for &density in &[0.13, 0.5, 0.91] {
            let mut rng = Rng::new(42, 7);
            let m = BitMatrix::random(&mut rng, 1000, 1000, density);
            let observed = m.count_ones() as f64 / 1e6;
            assert!(
                (observed - density).abs() < 0.02,
                "density {density}: observed {observed}"
            );
        }
    }

    #[test]
    fn rng_streams_are_reproducible_and_derivable() {
        let mut a = Rng::new(5, 3);
        let mut b = Rng::new(5, 3);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);

        let mut c = Rng::new(5, 3).derive(11);
        let mut d = Rng::new(5, 3).derive(11);
        assert_eq!(c.next_u64(), d.next_u64());
        let mut e = Rng::new(5, 3).derive(12);
        assert_ne!(c.next_u64(), e.next_u64());
    }

    #[test]
    fn next_below_is_roughly_uniform() {
        let mut rng = Rng::new(77, 0);
        let mut counts = [0usize; 5];
        for _ in 0..50_000 {
            counts[rng.next_below(5)] += 1;
        }
        for &c in &counts {
            assert!((8_000..12_000).contains(&c), "counts {counts:?}");
        }
    }

    #[test]
    fn vector_get_set_roundtrip_across_words() {
        let mut v = BitVector::zeros(130);
        v.set(0, true);
        v.set(64, true);
        v.set(129, true);
        assert!(v.get(0) && v.get(64) && v.get(129));
        assert!(!v.get(63));
        assert_eq!(v.count_ones(), 3);
        assert_eq!(v.iter_ones().collect::<Vec<_>>(), vec![0, 64, 129]);
        v.set(64, false);
        assert_eq!(v.count_ones(), 2);
    }

    proptest! {
        #[test]
        fn elementwise_matches_per_bit_evaluation(
            rows in 1usize..4,
            cols in 1usize..71,
            seed in any::<u64>(),
            op_idx in 0usize..4,
            broadcast in 0usize..3,
        ) {
            let op = [BitOp::Xor, BitOp::And, BitOp::Or, BitOp::AndNot][op_idx];
            let mut rng = Rng::new(seed, 0);
            let a = BitMatrix::random(&mut rng, rows, cols, 0.5);
            let b = BitMatrix::random(&mut rng, rows, cols, 0.5);
            let va = BitVector::random(&mut rng, cols, 0.5);

            let (out, get_a, get_b): (BitMatrix, Box<dyn Fn(usize, usize) -> bool>, Box<dyn Fn(usize, usize) -> bool>) =
                match broadcast {
                    0 => (
                        elementwise(op, &a, &b).unwrap(),
                        Box::new(|r, c| a.get(r, c)),
                        Box::new(|r, c| b.get(r, c)),
                    ),
                    1 => (
                        elementwise(op, &va, &b).unwrap(),
                        Box::new(|_, c| va.get(c)),
                        Box::new(|r, c| b.get(r, c)),
                    ),
                    _ => (
                        elementwise(op, &a, &va).unwrap(),
                        Box::new(|r, c| a.get(r, c)),
                        Box::new(|_, c| va.get(c)),
                    ),
                };

            prop_assert_eq!(out.rows(), rows);
            prop_assert_eq!(out.cols(), cols);
            for r in 0..rows {
                for c in 0..cols {
                    prop_assert_eq!(out.get(r, c), naive_op(op, get_a(r, c), get_b(r, c)));
                }
            }
            assert_pads_zero(&out);
        }

        #[test]
        fn popcount_rows_matches_bit_loop(rows in 0usize..4, cols in 0usize..130, seed in any::<u64>()) {
            let m = BitMatrix::random(&mut Rng::new(seed, 1), rows, cols, 0.4);
            let naive: Vec<usize> = (0..rows)
                .map(|r| (0..cols).filter(|&c| m.get(r, c)).count())
                .collect();
            prop_assert_eq!(m.popcount_rows(), naive);
        }

        #[test]
        fn vector_ops_preserve_pads_and_semantics(len in 1usize..130, seed in any::<u64>()) {
            let mut rng = Rng::new(seed, 2);
            let a = BitVector::random(&mut rng, len, 0.5);
            let b = BitVector::random(&mut rng, len, 0.5);
            for (out, f) in [
                (a.xor(&b), Box::new(|x: bool, y: bool| x ^ y) as Box<dyn Fn(bool, bool) -> bool>),
                (a.and(&b), Box::new(|x, y| x & y)),
                (a.or(&b), Box::new(|x, y| x | y)),
                (a.and_not(&b), Box::new(|x, y| x & !y)),
            ] {
                for i in 0..len {
                    prop_assert_eq!(out.get(i), f(a.get(i), b.get(i)));
                }
                let mut masked = out.words().to_vec();
                if let Some(last) = masked.last_mut() {
                    *last &= tail_mask(len);
                }
                prop_assert_eq!(out.words(), &masked[..]);
            }
        }
    }
}
