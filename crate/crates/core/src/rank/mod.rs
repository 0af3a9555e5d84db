//! Answer ranking.
//!
//! The default ranker searches linear orders of the answers for the one that puts
//! the most squared mass above the diagonal. It uses the strict upper triangle
//! (`i < j`); the diagonal squares are the same under every permutation, so the
//! inclusive (`i <= j`) objective has the same maximizers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ingest::AnswerPredictionMatrix;
use crate::model::JointMatrix;

mod variant;

pub use variant::{rank_variant, variant_brute_force, ClusterHierarchy, WeightedAnswer, VARIANT_BRUTE_FORCE_MAX, VARIANT_MAX};

/// Hard cap on the answer count for the subset DP.
pub const DEFAULT_MAX: usize = 20;
/// Cap for exhaustive permutation search.
pub const BRUTE_FORCE_MAX: usize = 8;

/// Subsets up to this size use a precomputed row-mass table.
const TABLE_MAX: usize = 16;

/// Anything the rankers can consume: a labelled square non-negative matrix.
pub trait AnswerMatrix {
    fn answers(&self) -> &[String];
    fn values(&self) -> DMatrix<f64>;
}

impl AnswerMatrix for JointMatrix {
    fn answers(&self) -> &[String] {
        &self.answers
    }

    fn values(&self) -> DMatrix<f64> {
        self.m.clone()
    }
}

impl AnswerMatrix for AnswerPredictionMatrix {
    fn answers(&self) -> &[String] {
        &self.answers
    }

    fn values(&self) -> DMatrix<f64> {
        self.to_dense()
    }
}

/// A linear order over answers, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub order: Vec<String>,
    /// `order` as indices into the input matrix.
    pub indices: Vec<usize>,
    /// Sum of squares strictly above the diagonal of the reordered matrix.
    pub objective: f64,
    /// Sum of squares strictly below the diagonal of the reordered matrix.
    pub lack_of_fit: f64,
}

pub(crate) fn check_input(answers: &[String], m: &DMatrix<f64>, p: &[f64]) -> Result<()> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(Error::validation("matrix", None, "has no answers"));
    }
    if answers.len() != rows {
        return Err(Error::DimensionMismatch(format!("{} labels for a {rows}x{rows} matrix", answers.len())));
    }
    if p.len() != rows {
        return Err(Error::DimensionMismatch(format!("{} frequencies for {rows} answers", p.len())));
    }
    for (index, &value) in p.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::NonPositiveFrequency { index, value });
        }
    }
    for ((i, j), v) in m.iter().enumerate().map(|(k, v)| ((k % rows, k / rows), v)) {
        if !(v.is_finite() && *v >= 0.0) {
            return Err(Error::validation("matrix", Some(vec![i, j]), format!("entry {v} is negative or not finite")));
        }
    }
    Ok(())
}

fn check_cap(algorithm: &'static str, size: usize, cap: usize) -> Result<()> {
    if size > cap {
        return Err(Error::TooLarge { algorithm, size, cap });
    }
    Ok(())
}

fn squares(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut sq = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            sq[i * n + j] = m[(i, j)] * m[(i, j)];
        }
    }
    sq
}

/// Subset DP over the answer indices of a square matrix.
///
/// `score[S]` is the best strict-upper-triangle mass over orders of subset `S`, and
/// `first[S]` the first element of that order. An order of `S` is built by putting
/// some `a` first and attaching the best order of `S \ {a}`; its score is
/// `sum_{b in S\{a}} M[a][b]^2 + score[S \ {a}]`, with the row sum accumulated in
/// ascending index order. Candidates are visited in ascending index order and
/// replace the incumbent when strictly better, or exactly tied with strictly larger
/// `p` for the new first element.
///
/// Returns the optimal order and its objective.
pub(crate) fn optimal_order(m: &DMatrix<f64>, p: &[f64]) -> (Vec<usize>, f64) {
    let n = m.nrows();
    debug_assert!(n <= DEFAULT_MAX);
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let sq = squares(m);
    let full = 1usize << n;
    let mut score = vec![0.0f64; full];
    let mut first = vec![0u8; full];

    // row_mass[a * full + S] = sum_{b in S} M[a][b]^2, accumulated in ascending b.
    let table = (n <= TABLE_MAX).then(|| {
        let mut t = vec![0.0f64; n * full];
        for a in 0..n {
            let row = &mut t[a * full..(a + 1) * full];
            for s in 1..full {
                let high = usize::BITS as usize - 1 - s.leading_zeros() as usize;
                row[s] = row[s & !(1 << high)] + sq[a * n + high];
            }
        }
        t
    });

    for s in 1..full {
        let mut best_score = f64::NEG_INFINITY;
        let mut best_first = usize::MAX;
        let mut bits = s;
        while bits != 0 {
            let a = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let rest = s & !(1 << a);
            let mass = match &table {
                Some(t) => t[a * full + rest],
                None => {
                    let mut acc = 0.0;
                    let mut r = rest;
                    while r != 0 {
                        let b = r.trailing_zeros() as usize;
                        r &= r - 1;
                        acc += sq[a * n + b];
                    }
                    acc
                }
            };
            let candidate = mass + score[rest];
            let take = best_first == usize::MAX
                || candidate > best_score
                || (candidate == best_score && p[a] > p[best_first]);
            if take {
                best_score = candidate;
                best_first = a;
            }
        }
        score[s] = best_score;
        first[s] = best_first as u8;
    }

    let mut order = Vec::with_capacity(n);
    let mut s = full - 1;
    while s != 0 {
        let a = first[s] as usize;
        order.push(a);
        s &= !(1 << a);
    }
    (order, score[full - 1])
}

/// Strict upper and strict lower triangle mass of `m` reordered by `order`.
pub(crate) fn triangle_masses(m: &DMatrix<f64>, order: &[usize]) -> (f64, f64) {
    let mut upper = 0.0;
    let mut lower = 0.0;
    for (i, &a) in order.iter().enumerate() {
        for &b in &order[i + 1..] {
            upper += m[(a, b)] * m[(a, b)];
            lower += m[(b, a)] * m[(b, a)];
        }
    }
    (upper, lower)
}

fn ranking_from(answers: &[String], m: &DMatrix<f64>, indices: Vec<usize>, objective: f64) -> Ranking {
    let (_, lower) = triangle_masses(m, &indices);
    Ranking {
        order: indices.iter().map(|&i| answers[i].clone()).collect(),
        indices,
        objective,
        lack_of_fit: lower,
    }
}

/// Default ranking: the order maximizing the strict-upper-triangle sum of squares,
/// found by subset dynamic programming in `O(2^n n^2)`. `p` breaks ties in favour
/// of more frequent answers.
pub fn rank_default<M: AnswerMatrix + ?Sized>(m: &M, p: &[f64]) -> Result<Ranking> {
    let values = m.values();
    check_input(m.answers(), &values, p)?;
    check_cap("default ranking", values.nrows(), DEFAULT_MAX)?;
    let (indices, objective) = optimal_order(&values, p);
    Ok(ranking_from(m.answers(), &values, indices, objective))
}

/// Exhaustive search over all permutations, for cross-checking [`rank_default`].
///
/// The objective of an order is accumulated exactly as the DP does: from the last
/// position backwards, each position adding its row mass over the later answers
/// taken in ascending index order. Among maximal orders the winner is the one that
/// is lexicographically best position by position, preferring larger `p` and then
/// the smaller index.
pub fn rank_brute_force<M: AnswerMatrix + ?Sized>(m: &M, p: &[f64]) -> Result<Ranking> {
    let values = m.values();
    check_input(m.answers(), &values, p)?;
    check_cap("brute-force ranking", values.nrows(), BRUTE_FORCE_MAX)?;
    let n = values.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let objective = backward_objective(&values, &perm);
        let better = match &best {
            None => true,
            Some((score, incumbent)) => {
                objective > *score || (objective == *score && lex_preferred(&perm, incumbent, p))
            }
        };
        if better {
            best = Some((objective, perm.clone()));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let (objective, indices) = best.expect("at least one permutation");
    Ok(ranking_from(m.answers(), &values, indices, objective))
}

fn backward_objective(m: &DMatrix<f64>, perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut later = vec![false; n];
    let mut acc = 0.0;
    for &a in perm.iter().rev() {
        let mut mass = 0.0;
        for b in (0..n).filter(|&b| later[b]) {
            mass += m[(a, b)] * m[(a, b)];
        }
        acc += mass;
        later[a] = true;
    }
    acc
}

fn lex_preferred(candidate: &[usize], incumbent: &[usize], p: &[f64]) -> bool {
    for (&c, &i) in candidate.iter().zip(incumbent) {
        if c != i {
            return p[c] > p[i] || (p[c] == p[i] && c < i);
        }
    }
    false
}

pub(crate) fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
