//! Fixtures shared by the benchmarks.

use hierarchy_core::{AnswerPredictionMatrix, JointMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random integer-valued matrix over `n` answers with positive frequencies.
pub fn random_joint(n: usize, seed: u64) -> (JointMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| f64::from(rng.random_range(0u32..50))).collect())
        .collect();
    let p = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
    let answers = (0..n).map(|i| format!("a{i}")).collect();
    (JointMatrix::from_rows(answers, &rows).expect("square"), p)
}

/// Random count matrix with supports, as produced by ingestion.
pub fn random_counts(n: usize, seed: u64) -> AnswerPredictionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support: Vec<u64> = (0..n).map(|_| rng.random_range(5..200)).collect();
    AnswerPredictionMatrix {
        answers: (0..n).map(|i| format!("a{i}")).collect(),
        counts: (0..n).map(|_| (0..n).map(|_| rng.random_range(0..60)).collect()).collect(),
        n_respondents: support.iter().sum(),
        support,
        dropped_predictions: 0,
    }
}
