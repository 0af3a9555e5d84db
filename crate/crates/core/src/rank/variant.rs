//! Clustered ranking: answers are grouped into types and the types are ranked.
//!
//! For a partition of the answers, each answer `a` in block `t` gets weight
//! `sqrt(p_a^2 / sum_{a' in t} p_{a'}^2)`, which makes the weight matrix `W`
//! semi-orthogonal (`W W^T = I`) with within-block weights proportional to `p`.
//! The blocks are ordered by running the default ranker on `W M W^T`, and the
//! partition maximizing `sum_{i <= j} (W M W^T)_{ij}^2` wins. Unlike the permutation
//! case the diagonal here depends on the clustering, so it is part of the objective.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{check_cap, check_input, next_permutation, optimal_order, AnswerMatrix};
use crate::diagnostics::residual_for;
use crate::error::Result;
use crate::partition::{for_each_completion, partitions};

/// Largest answer set for the partition search (B(12) = 4,213,597 partitions).
pub const VARIANT_MAX: usize = 12;
pub const VARIANT_BRUTE_FORCE_MAX: usize = 6;

/// Restricted-growth prefix length used to split the search across threads.
const SPLIT_PREFIX: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAnswer {
    pub answer: String,
    /// Index into the input matrix.
    pub index: usize,
    /// Row-stochastic weight within the cluster.
    pub weight: f64,
}

/// Ordered answer clusters, most sophisticated type first.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterHierarchy {
    /// Each cluster sorted by descending weight (ties by input index).
    pub clusters: Vec<Vec<WeightedAnswer>>,
    /// Cluster rank of each input answer.
    pub assignment: Vec<usize>,
    /// Selected `W` with unit-norm rows, rows in hierarchy order.
    pub w_unit: DMatrix<f64>,
    /// `w_unit` with rows rescaled to sum to 1.
    pub w_star: DMatrix<f64>,
    /// `sum_{i <= j} (W M W^T)_{ij}^2` at `w_unit`.
    pub objective: f64,
    pub induced_order: Vec<String>,
    pub induced_indices: Vec<usize>,
    /// `||M - W^T Up(W M W^T) W||_F^2` at `w_unit`.
    pub lack_of_fit: f64,
}

impl ClusterHierarchy {
    pub fn num_types(&self) -> usize {
        self.clusters.len()
    }

    /// The answer with the largest `support` within the top-ranked cluster; ties go
    /// to the answer ranked first.
    pub fn top_by_support(&self, support: &[u64]) -> &str {
        let top = &self.clusters[0];
        let mut best = &top[0];
        for wa in &top[1..] {
            if support[wa.index] > support[best.index] {
                best = wa;
            }
        }
        &best.answer
    }
}

fn unit_weights(p: &[f64], blocks: &[u8], k: usize) -> Vec<f64> {
    let mut norm = vec![0.0; k];
    for (a, &b) in blocks.iter().enumerate() {
        norm[b as usize] += p[a] * p[a];
    }
    blocks
        .iter()
        .enumerate()
        .map(|(a, &b)| (p[a] * p[a] / norm[b as usize]).sqrt())
        .collect()
}

#[derive(Debug, Clone)]
struct Candidate {
    objective: f64,
    blocks: Vec<u8>,
    /// Block ids in hierarchy order.
    order: Vec<usize>,
}

impl Candidate {
    fn k(&self) -> usize {
        self.order.len()
    }

    /// Strictly larger objective, or an exact tie with fewer clusters.
    fn improves_on(&self, other: &Candidate) -> bool {
        self.objective > other.objective || (self.objective == other.objective && self.k() < other.k())
    }
}

fn keep_better(best: Option<Candidate>, next: Candidate) -> Option<Candidate> {
    match best {
        Some(b) if !next.improves_on(&b) => Some(b),
        _ => Some(next),
    }
}

fn evaluate(m: &DMatrix<f64>, p: &[f64], blocks: &[u8], k: usize) -> Candidate {
    let n = blocks.len();
    let w = unit_weights(p, blocks, k);
    let mut lambda = DMatrix::<f64>::zeros(k, k);
    let mut p_hat = vec![0.0f64; k];
    for a in 0..n {
        let ta = blocks[a] as usize;
        p_hat[ta] = p_hat[ta].max(p[a]);
        for g in 0..n {
            lambda[(ta, blocks[g] as usize)] += w[a] * m[(a, g)] * w[g];
        }
    }
    let (order, _) = optimal_order(&lambda, &p_hat);
    let mut objective = 0.0;
    for i in 0..k {
        for j in i..k {
            let v = lambda[(order[i], order[j])];
            objective += v * v;
        }
    }
    Candidate {
        objective,
        blocks: blocks.to_vec(),
        order,
    }
}

fn hierarchy_from(answers: &[String], m: &DMatrix<f64>, p: &[f64], cand: &Candidate) -> ClusterHierarchy {
    let n = answers.len();
    let k = cand.k();
    let w = unit_weights(p, &cand.blocks, k);
    let mut rank_of_block = vec![0usize; k];
    for (rank, &block) in cand.order.iter().enumerate() {
        rank_of_block[block] = rank;
    }
    let assignment: Vec<usize> = cand.blocks.iter().map(|&b| rank_of_block[b as usize]).collect();
    let mut w_unit = DMatrix::<f64>::zeros(k, n);
    for a in 0..n {
        w_unit[(assignment[a], a)] = w[a];
    }
    let mut w_star = w_unit.clone();
    for mut row in w_star.row_iter_mut() {
        let s: f64 = row.sum();
        row /= s;
    }
    let mut clusters: Vec<Vec<WeightedAnswer>> = vec![Vec::new(); k];
    for a in 0..n {
        let t = assignment[a];
        clusters[t].push(WeightedAnswer {
            answer: answers[a].clone(),
            index: a,
            weight: w_star[(t, a)],
        });
    }
    for cluster in &mut clusters {
        cluster.sort_by(|x, y| y.weight.total_cmp(&x.weight).then(x.index.cmp(&y.index)));
    }
    let induced_indices: Vec<usize> = clusters.iter().flatten().map(|wa| wa.index).collect();
    let lack_of_fit = residual_for(m, &w_unit).0;
    ClusterHierarchy {
        induced_order: induced_indices.iter().map(|&i| answers[i].clone()).collect(),
        induced_indices,
        clusters,
        assignment,
        w_unit,
        w_star,
        objective: cand.objective,
        lack_of_fit,
    }
}

/// Clustered ranking over all set partitions of the answers. Learns the number of
/// types. On exact objective ties the partition with fewer clusters wins, then the
/// one earlier in restricted-growth lexicographic order.
pub fn rank_variant<M: AnswerMatrix + ?Sized>(m: &M, p: &[f64]) -> Result<ClusterHierarchy> {
    let values = m.values();
    check_input(m.answers(), &values, p)?;
    let n = values.nrows();
    check_cap("variant ranking", n, VARIANT_MAX)?;

    let prefixes = partitions(n.min(SPLIT_PREFIX));
    let per_prefix: Vec<Option<Candidate>> = prefixes
        .par_iter()
        .map(|prefix| {
            let mut best = None;
            for_each_completion(n, prefix, |blocks, k| {
                best = keep_better(best.take(), evaluate(&values, p, blocks, k));
            });
            best
        })
        .collect();
    let best = per_prefix
        .into_iter()
        .flatten()
        .fold(None, keep_better)
        .expect("every answer set has a partition");
    Ok(hierarchy_from(m.answers(), &values, p, &best))
}

/// Exhaustive search over every partition and every ordering of its clusters,
/// scoring each with a dense `W M W^T` product. Cross-check for [`rank_variant`].
pub fn variant_brute_force<M: AnswerMatrix + ?Sized>(m: &M, p: &[f64]) -> Result<ClusterHierarchy> {
    let values = m.values();
    check_input(m.answers(), &values, p)?;
    let n = values.nrows();
    check_cap("brute-force variant ranking", n, VARIANT_BRUTE_FORCE_MAX)?;

    // Every labelling of answers with labels 0..n, relabelled by first appearance.
    let mut seen = HashSet::new();
    let mut labels = vec![0usize; n];
    let mut best: Option<Candidate> = None;
    loop {
        let mut relabel: Vec<usize> = Vec::new();
        let blocks: Vec<u8> = labels
            .iter()
            .map(|l| match relabel.iter().position(|x| x == l) {
                Some(i) => i as u8,
                None => {
                    relabel.push(*l);
                    (relabel.len() - 1) as u8
                }
            })
            .collect();
        let k = relabel.len();
        if seen.insert(blocks.clone()) {
            let w = unit_weights(p, &blocks, k);
            let mut order: Vec<usize> = (0..k).collect();
            loop {
                let mut w_mat = DMatrix::<f64>::zeros(k, n);
                for a in 0..n {
                    let rank = order.iter().position(|&b| b == blocks[a] as usize).unwrap();
                    w_mat[(rank, a)] = w[a];
                }
                let lambda = &w_mat * &values * w_mat.transpose();
                let objective: f64 = (0..k)
                    .flat_map(|i| (i..k).map(move |j| (i, j)))
                    .map(|(i, j)| lambda[(i, j)].powi(2))
                    .sum();
                let cand = Candidate {
                    objective,
                    blocks: blocks.clone(),
                    order: order.clone(),
                };
                best = keep_better(best, cand);
                if !next_permutation(&mut order) {
                    break;
                }
            }
        }
        // Next labelling, odometer style.
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < n {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    let best = best.expect("at least one partition");
    Ok(hierarchy_from(m.answers(), &values, p, &best))
}
