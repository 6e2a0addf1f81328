//! Error projection: pick as many fixing masks as possible whose OR does
//! not fully cover any protecting mask.
//!
//! An instance is a pair of matrices over the same columns: `C` holds masks
//! that would spoil currently-correct outputs if fully covered, `I` holds
//! candidate masks that each fix one incorrect output. The result mask `D`
//! is the OR of the chosen `I` rows, subject to `C_i ∧ D ≠ C_i` for every
//! `C` row.

use crate::bits::{words, BitMatrix, BitVector, Rng};
use crate::{Error, Result};

/// Default cap on the number of candidate rows the exact solver accepts.
pub const DEFAULT_EXACT_LIMIT: usize = 20;

/// A normalized projection instance.
///
/// All-zero `C` rows are dropped: taken literally, a zero row is covered by
/// every mask including the empty one, yet it corresponds to an output no
/// flip can spoil, so it imposes no constraint. All-zero `I` rows are
/// dropped as well (they fix nothing). Chosen-row indices reported by the
/// solvers always refer to the rows of the original `I`.
#[derive(Clone, Debug)]
pub struct ProjectionProblem {
    cols: usize,
    c: BitMatrix,
    i: BitMatrix,
    i_origin: Vec<usize>,
}

impl ProjectionProblem {
    pub fn new(c: &BitMatrix, i: &BitMatrix) -> Result<Self> {
        if c.rows() > 0 && i.rows() > 0 && c.cols() != i.cols() {
            return Err(Error::ColumnMismatch {
                left: c.cols(),
                right: i.cols(),
            });
        }
        let cols = if c.rows() > 0 || i.rows() == 0 { c.cols() } else { i.cols() };
        let c_rows: Vec<BitVector> = (0..c.rows())
            .filter(|&r| c.row_any(r))
            .map(|r| c.row(r))
            .collect();
        let mut i_origin = Vec::new();
        let mut i_rows = Vec::new();
        for r in 0..i.rows() {
            if i.row_any(r) {
                i_origin.push(r);
                i_rows.push(i.row(r));
            }
        }
        Ok(Self {
            cols,
            c: BitMatrix::from_rows(cols, &c_rows)?,
            i: BitMatrix::from_rows(cols, &i_rows)?,
            i_origin,
        })
    }

    /// Builds an instance directly from row lists of width `cols`.
    pub fn from_rows(cols: usize, c_rows: &[BitVector], i_rows: &[BitVector]) -> Result<Self> {
        let c = BitMatrix::from_rows(cols, c_rows)?;
        let i = BitMatrix::from_rows(cols, i_rows)?;
        Self::new(&c, &i)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Protecting masks after normalization.
    pub fn protecting(&self) -> &BitMatrix {
        &self.c
    }

    /// Candidate fixing masks after normalization.
    pub fn candidates(&self) -> &BitMatrix {
        &self.i
    }

    /// Number of candidate rows the solvers will consider.
    pub fn candidate_count(&self) -> usize {
        self.i.rows()
    }

    /// Original `I` row index of normalized candidate `k`.
    pub fn original_index(&self, k: usize) -> usize {
        self.i_origin[k]
    }

    /// `D` may be ORed with `row` without fully covering any protecting mask.
    fn feasible_with(&self, d: &BitVector, row: usize) -> bool {
        let rw = self.i.row_words(row);
        (0..self.c.rows()).all(|r| {
            let cw = self.c.row_words(r);
            // Some bit of C_r must stay outside D ∪ row.
            cw.iter()
                .zip(d.words())
                .zip(rw)
                .any(|((&c, &dv), &iv)| c & !(dv | iv) != 0)
        })
    }
}

/// Exact maximum projection by branch and bound over candidate inclusion.
///
/// Among maximum-cardinality feasible subsets the lexicographically
/// smallest index set wins, which is exactly the first one found by an
/// include-before-exclude depth-first search in ascending row order.
/// Refuses instances with more than `limit` candidates.
pub fn project_exact(
    problem: &ProjectionProblem,
    limit: usize,
) -> Result<(BitVector, Vec<usize>)> {
    let q = problem.candidate_count();
    if q > limit {
        return Err(Error::ProjectionTooLarge { rows: q, limit });
    }
    let mut best_chosen: Vec<usize> = Vec::new();
    let mut best_d = BitVector::zeros(problem.cols());
    let mut chosen: Vec<usize> = Vec::new();
    search(
        problem,
        0,
        &BitVector::zeros(problem.cols()),
        &mut chosen,
        &mut best_chosen,
        &mut best_d,
    );
    let indices = best_chosen.iter().map(|&k| problem.original_index(k)).collect();
    Ok((best_d, indices))
}

fn search(
    problem: &ProjectionProblem,
    row: usize,
    d: &BitVector,
    chosen: &mut Vec<usize>,
    best_chosen: &mut Vec<usize>,
    best_d: &mut BitVector,
) {
    let q = problem.candidate_count();
    // Even taking every remaining row cannot beat the incumbent. Ties never
    // replace it, so the first (lexicographically smallest) maximum stays.
    if chosen.len() + (q - row) <= best_chosen.len() {
        return;
    }
    if row == q {
        if chosen.len() > best_chosen.len() {
            best_chosen.clone_from(chosen);
            best_d.clone_from(d);
        }
        return;
    }
    let rw = problem.i.row_words(row);
    if words::subset(rw, d.words()) {
        // Free inclusion: D is unchanged, so every maximal subset takes it.
        chosen.push(row);
        search(problem, row + 1, d, chosen, best_chosen, best_d);
        chosen.pop();
        return;
    }
    if problem.feasible_with(d, row) {
        let mut with = d.clone();
        with.or_assign_words(rw);
        chosen.push(row);
        search(problem, row + 1, &with, chosen, best_chosen, best_d);
        chosen.pop();
    }
    // D only grows along a branch, so a row infeasible here stays infeasible.
    search(problem, row + 1, d, chosen, best_chosen, best_d);
}

/// Greedy projection: scan candidates by ascending (popcount, index) and
/// accept a row whenever the constraint still holds afterwards. Always
/// feasible, possibly sub-maximal; used past the exact solver's size limit.
pub fn project_greedy(problem: &ProjectionProblem) -> (BitVector, Vec<usize>) {
    let mut order: Vec<usize> = (0..problem.candidate_count()).collect();
    let weights: Vec<usize> = problem.i.popcount_rows();
    order.sort_by_key(|&k| (weights[k], k));

    let mut d = BitVector::zeros(problem.cols());
    let mut chosen = Vec::new();
    for k in order {
        let rw = problem.i.row_words(k);
        if words::subset(rw, d.words()) || problem.feasible_with(&d, k) {
            d.or_assign_words(rw);
            chosen.push(problem.original_index(k));
        }
    }
    chosen.sort_unstable();
    (d, chosen)
}

/// Specialized projection: the column-wise union of the candidates minus
/// every column touched by a protecting mask.
pub fn project_specialized(problem: &ProjectionProblem) -> BitVector {
    let mut fix = BitVector::zeros(problem.cols());
    for r in 0..problem.i.rows() {
        fix.or_assign_words(problem.i.row_words(r));
    }
    let mut spoil = BitVector::zeros(problem.cols());
    for r in 0..problem.c.rows() {
        spoil.or_assign_words(problem.c.row_words(r));
    }
    fix.and_not_assign(&spoil);
    fix
}

/// Keeps exactly one set bit of `d`, chosen uniformly, so that later
/// sensitivity rows are not zeroed wholesale by a multi-bit mask. Masks
/// with at most one bit pass through unchanged.
pub fn retain_one(d: &BitVector, rng: &mut Rng) -> BitVector {
    let ones = d.count_ones();
    if ones <= 1 {
        return d.clone();
    }
    let target = rng.next_below(ones);
    let bit = d.iter_ones().nth(target).expect("popcount counted this bit");
    BitVector::unit(d.len(), bit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::Rng;
    use crate::oracle::projection_bruteforce;
    use proptest::prelude::*;

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::from_bits(&bits.iter().map(|&b| b != 0).collect::<Vec<_>>())
    }

    fn bm(rows: usize, cols: usize, bits: &[u8]) -> BitMatrix {
        BitMatrix::from_bits(rows, cols, &bits.iter().map(|&b| b != 0).collect::<Vec<_>>())
    }

    fn six_column_instance() -> ProjectionProblem {
        let c = bm(2, 6, &[1, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 1]);
        let i = bm(3, 6, &[1, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1]);
        ProjectionProblem::new(&c, &i).unwrap()
    }

    #[test]
    fn exact_six_column_instance() {
        let (d, chosen) = project_exact(&six_column_instance(), DEFAULT_EXACT_LIMIT).unwrap();
        assert_eq!(d, bv(&[1, 0, 0, 1, 0, 0]));
        assert_eq!(chosen, vec![0, 1]);
    }

    #[test]
    fn exact_with_nothing_to_spoil_takes_everything() {
        let p = ProjectionProblem::new(&BitMatrix::zeros(0, 2), &bm(1, 2, &[1, 0])).unwrap();
        let (d, chosen) = project_exact(&p, 20).unwrap();
        assert_eq!(d, bv(&[1, 0]));
        assert_eq!(chosen, vec![0]);
    }

    #[test]
    fn exact_rejects_candidate_covering_a_protector() {
        let p = ProjectionProblem::new(&bm(1, 2, &[1, 0]), &bm(1, 2, &[1, 0])).unwrap();
        let (d, chosen) = project_exact(&p, 20).unwrap();
        assert!(d.is_zero());
        assert!(chosen.is_empty());
    }

    #[test]
    fn exact_refuses_oversized_instances() {
        let p = ProjectionProblem::new(&BitMatrix::zeros(0, 3), &BitMatrix::ones(5, 3)).unwrap();
        assert!(matches!(
            project_exact(&p, 4),
            Err(Error::ProjectionTooLarge { rows: 5, limit: 4 })
        ));
    }

    #[test]
    fn greedy_six_column_instance_matches_exact() {
        let p = six_column_instance();
        let (d, chosen) = project_greedy(&p);
        assert_eq!(d, bv(&[1, 0, 0, 1, 0, 0]));
        assert_eq!(chosen, vec![0, 1]);
    }

    #[test]
    fn greedy_accepts_duplicate_rows() {
        let p = ProjectionProblem::new(
            &BitMatrix::zeros(0, 2),
            &bm(2, 2, &[1, 0, 1, 0]),
        )
        .unwrap();
        let (d, chosen) = project_greedy(&p);
        assert_eq!(d, bv(&[1, 0]));
        assert_eq!(chosen, vec![0, 1]);
    }

    #[test]
    fn greedy_stops_before_covering_a_protector() {
        let p = ProjectionProblem::new(&bm(1, 2, &[1, 1]), &bm(2, 2, &[1, 0, 0, 1])).unwrap();
        let (d, chosen) = project_greedy(&p);
        assert_eq!(d, bv(&[1, 0]));
        assert_eq!(chosen, vec![0]);
        // The brute-force maximum is also a single row.
        let (_, best) = projection_bruteforce(p.protecting(), p.candidates())
            .unwrap()
            .unwrap();
        assert_eq!(best.len(), 1);
    }

    #[test]
    fn specialized_column_formula_examples() {
        let p = ProjectionProblem::new(
            &bm(1, 4, &[0, 1, 0, 0]),
            &bm(2, 4, &[1, 1, 0, 0, 0, 0, 0, 1]),
        )
        .unwrap();
        assert_eq!(project_specialized(&p), bv(&[1, 0, 0, 1]));

        let empty_i = ProjectionProblem::new(&bm(1, 3, &[1, 1, 0]), &BitMatrix::zeros(0, 3)).unwrap();
        assert!(project_specialized(&empty_i).is_zero());

        let covered = ProjectionProblem::new(
            &bm(1, 3, &[1, 1, 1]),
            &bm(2, 3, &[1, 0, 0, 0, 1, 1]),
        )
        .unwrap();
        assert!(project_specialized(&covered).is_zero());
    }

    #[test]
    fn retain_one_passes_small_masks_through() {
        let mut rng = Rng::new(1, 0);
        assert_eq!(retain_one(&bv(&[0, 0, 0]), &mut rng), bv(&[0, 0, 0]));
        assert_eq!(retain_one(&bv(&[0, 1, 0]), &mut rng), bv(&[0, 1, 0]));
    }

    #[test]
    fn retain_one_is_deterministic_per_seed_and_uniform_across_seeds() {
        let d = bv(&[1, 0, 1]);
        for seed in 0..20 {
            let a = retain_one(&d, &mut Rng::new(seed, 9));
            let b = retain_one(&d, &mut Rng::new(seed, 9));
            assert_eq!(a, b);
            assert_eq!(a.count_ones(), 1);
            assert!(d.and(&a) == a, "retained bit must come from the input");
        }
        // Uniformity over the two set bits: chi-squared with 1 dof at the
        // 1% level (critical value 6.635) across 10^4 seeded draws.
        let mut counts = [0usize; 2];
        for seed in 0..10_000u64 {
            let kept = retain_one(&d, &mut Rng::new(seed, 10));
            if kept.get(0) {
                counts[0] += 1;
            } else {
                counts[1] += 1;
            }
        }
        let expected = 5_000f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 6.635, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn exact_matches_bruteforce_on_random_instances() {
        let mut rng = Rng::new(33, 0);
        for _ in 0..200 {
            let n = 3 + rng.next_below(8);
            let p_rows = rng.next_below(5);
            let q_rows = 1 + rng.next_below(9);
            let c = BitMatrix::random(&mut rng, p_rows, n, 0.35);
            let i = BitMatrix::random(&mut rng, q_rows, n, 0.35);
            let problem = ProjectionProblem::new(&c, &i).unwrap();
            let (d, chosen) = project_exact(&problem, DEFAULT_EXACT_LIMIT).unwrap();
            let (bd, bchosen) = projection_bruteforce(problem.protecting(), problem.candidates())
                .unwrap()
                .expect("normalized instances always have a feasible subset");
            let mapped: Vec<usize> = bchosen.iter().map(|&k| problem.original_index(k)).collect();
            assert_eq!(chosen, mapped);
            assert_eq!(d, bd);
        }
    }

    proptest! {
        #[test]
        fn exact_and_greedy_never_cover_a_protector(
            seed in any::<u64>(),
            n in 2usize..12,
            p_rows in 0usize..6,
            q_rows in 0usize..8,
        ) {
            let mut rng = Rng::new(seed, 1);
            let c = BitMatrix::random(&mut rng, p_rows, n, 0.4);
            let i = BitMatrix::random(&mut rng, q_rows, n, 0.4);
            let problem = ProjectionProblem::new(&c, &i).unwrap();

            let (exact_d, exact_chosen) = project_exact(&problem, DEFAULT_EXACT_LIMIT).unwrap();
            let (greedy_d, greedy_chosen) = project_greedy(&problem);

            for d in [&exact_d, &greedy_d] {
                for r in 0..problem.protecting().rows() {
                    let cr = problem.protecting().row(r);
                    prop_assert_ne!(cr.and(d), cr);
                }
            }
            prop_assert!(greedy_chosen.len() <= exact_chosen.len());

            // The mask is the OR of the chosen original rows.
            let mut acc = BitVector::zeros(problem.cols());
            for &k in &exact_chosen {
                acc.or_assign(&i.row(k));
            }
            prop_assert_eq!(acc, exact_d);
        }

        #[test]
        fn specialized_matches_per_column_loop(
            seed in any::<u64>(),
            n in 1usize..40,
            p_rows in 0usize..5,
            q_rows in 0usize..5,
        ) {
            let mut rng = Rng::new(seed, 2);
            let c = BitMatrix::random(&mut rng, p_rows, n, 0.3);
            let i = BitMatrix::random(&mut rng, q_rows, n, 0.3);
            let problem = ProjectionProblem::new(&c, &i).unwrap();
            let d = project_specialized(&problem);
            for col in 0..n {
                let in_i = (0..q_rows).any(|r| i.get(r, col));
                let in_c = (0..p_rows).any(|r| c.get(r, col));
                prop_assert_eq!(d.get(col), in_i && !in_c);
            }
        }
    }
}
