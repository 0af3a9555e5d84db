//! Generative model of answers and predictions.
//!
//! Each respondent has a latent type `t` drawn with probability `p_t`. A type-`t`
//! respondent answers by sampling from `w_t`, and makes each prediction by first
//! picking an oracle type `t'` with probability `p_{t->t'}` and then sampling from
//! `w_{t'}`. The type/prediction-type joint is stored as `lambda[t][t'] = p_t * p_{t->t'}`,
//! so `p_t` is the `t`-th row sum of `lambda`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ResponseRecord;

/// Absolute tolerance for every probability check in this module.
pub const PROB_TOL: f64 = 1e-12;

/// Question id given to simulated records unless the caller picks one.
pub const SIMULATED_QUESTION_ID: &str = "sim";

/// Distribution over the number of predictions a respondent emits.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictionCount {
    Point(u32),
    /// `(count, probability)` pairs sorted by count.
    Categorical(Vec<(u32, f64)>),
}

impl Default for PredictionCount {
    fn default() -> Self {
        PredictionCount::Point(1)
    }
}

impl PredictionCount {
    pub fn mean(&self) -> f64 {
        match self {
            PredictionCount::Point(k) => f64::from(*k),
            PredictionCount::Categorical(probs) => {
                probs.iter().map(|(k, p)| f64::from(*k) * p).sum()
            }
        }
    }

    fn from_spec(spec: &PredictionCountSpec) -> Result<Self> {
        match spec {
            PredictionCountSpec::Point { value } => Ok(PredictionCount::Point(*value)),
            PredictionCountSpec::Categorical { probs } => {
                if probs.is_empty() {
                    return Err(Error::validation(
                        "prediction_count.probs",
                        None,
                        "categorical distribution is empty",
                    ));
                }
                let mut out = Vec::with_capacity(probs.len());
                for (key, &p) in probs {
                    let count: u32 = key.trim().parse().map_err(|_| {
                        Error::validation(
                            "prediction_count.probs",
                            None,
                            format!("key {key:?} is not a non-negative integer"),
                        )
                    })?;
                    if !p.is_finite() || p < 0.0 {
                        return Err(Error::validation(
                            "prediction_count.probs",
                            None,
                            format!("probability for count {count} is {p}"),
                        ));
                    }
                    out.push((count, p));
                }
                out.sort_by_key(|&(k, _)| k);
                if out.windows(2).any(|w| w[0].0 == w[1].0) {
                    return Err(Error::validation(
                        "prediction_count.probs",
                        None,
                        "duplicate count key",
                    ));
                }
                let total: f64 = out.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > PROB_TOL {
                    return Err(Error::validation(
                        "prediction_count.probs",
                        None,
                        format!("probabilities sum to {total}, expected 1"),
                    ));
                }
                Ok(PredictionCount::Categorical(out))
            }
        }
    }

    fn to_spec(&self) -> PredictionCountSpec {
        match self {
            PredictionCount::Point(value) => PredictionCountSpec::Point { value: *value },
            PredictionCount::Categorical(probs) => PredictionCountSpec::Categorical {
                probs: probs.iter().map(|(k, p)| (k.to_string(), *p)).collect(),
            },
        }
    }
}

/// JSON form of [`PredictionCount`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PredictionCountSpec {
    Point { value: u32 },
    Categorical { probs: BTreeMap<String, f64> },
}

/// JSON model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub answers: Vec<String>,
    pub types: Vec<String>,
    pub w: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    #[serde(default = "default_prediction_count")]
    pub prediction_count: PredictionCountSpec,
}

fn default_prediction_count() -> PredictionCountSpec {
    PredictionCountSpec::Point { value: 1 }
}

/// A validated generative model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinkingModel {
    answers: Vec<String>,
    types: Vec<String>,
    w: DMatrix<f64>,
    lambda: DMatrix<f64>,
    prediction_count: PredictionCount,
}

impl ThinkingModel {
    pub fn new(
        answers: Vec<String>,
        types: Vec<String>,
        w: DMatrix<f64>,
        lambda: DMatrix<f64>,
        prediction_count: PredictionCount,
    ) -> Result<Self> {
        let model = ThinkingModel {
            answers,
            types,
            w,
            lambda,
            prediction_count,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let n_types = spec.types.len();
        let n_answers = spec.answers.len();
        if spec.w.len() != n_types {
            return Err(Error::validation(
                "w",
                None,
                format!("has {} rows, expected one per type ({n_types})", spec.w.len()),
            ));
        }
        for (t, row) in spec.w.iter().enumerate() {
            if row.len() != n_answers {
                return Err(Error::validation(
                    "w",
                    Some(vec![t]),
                    format!("has {} entries, expected one per answer ({n_answers})", row.len()),
                ));
            }
        }
        if spec.lambda.len() != n_types {
            return Err(Error::validation(
                "lambda",
                None,
                format!("has {} rows, expected {n_types}", spec.lambda.len()),
            ));
        }
        for (t, row) in spec.lambda.iter().enumerate() {
            if row.len() != n_types {
                return Err(Error::validation(
                    "lambda",
                    Some(vec![t]),
                    format!("has {} entries, expected {n_types}", row.len()),
                ));
            }
        }
        let w = DMatrix::from_fn(n_types, n_answers, |t, a| spec.w[t][a]);
        let lambda = DMatrix::from_fn(n_types, n_types, |t, u| spec.lambda[t][u]);
        let prediction_count = PredictionCount::from_spec(&spec.prediction_count)?;
        ThinkingModel::new(
            spec.answers.clone(),
            spec.types.clone(),
            w,
            lambda,
            prediction_count,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        ThinkingModel::from_spec(&spec)
    }

    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            answers: self.answers.clone(),
            types: self.types.clone(),
            w: rows_of(&self.w),
            lambda: rows_of(&self.lambda),
            prediction_count: self.prediction_count.to_spec(),
        }
    }

    /// Same model with a different prediction-count distribution.
    pub fn with_prediction_count(&self, prediction_count: PredictionCount) -> Result<Self> {
        ThinkingModel::new(
            self.answers.clone(),
            self.types.clone(),
            self.w.clone(),
            self.lambda.clone(),
            prediction_count,
        )
    }

    fn validate(&self) -> Result<()> {
        let n_types = self.types.len();
        let n_answers = self.answers.len();
        if n_answers == 0 {
            return Err(Error::validation("answers", None, "is empty"));
        }
        if n_types == 0 {
            return Err(Error::validation("types", None, "is empty"));
        }
        check_unique("answers", &self.answers)?;
        check_unique("types", &self.types)?;
        if self.w.shape() != (n_types, n_answers) {
            return Err(Error::validation(
                "w",
                None,
                format!("shape {:?}, expected ({n_types}, {n_answers})", self.w.shape()),
            ));
        }
        if self.lambda.shape() != (n_types, n_types) {
            return Err(Error::validation(
                "lambda",
                None,
                format!("shape {:?}, expected ({n_types}, {n_types})", self.lambda.shape()),
            ));
        }
        for t in 0..n_types {
            for a in 0..n_answers {
                let v = self.w[(t, a)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::validation("w", Some(vec![t, a]), format!("entry {v} is negative or not finite")));
                }
            }
            let row_sum: f64 = self.w.row(t).iter().sum();
            if (row_sum - 1.0).abs() > PROB_TOL {
                return Err(Error::validation("w", Some(vec![t]), format!("row sums to {row_sum}, expected 1")));
            }
        }
        for t in 0..n_types {
            for u in 0..n_types {
                let v = self.lambda[(t, u)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::validation("lambda", Some(vec![t, u]), format!("entry {v} is negative or not finite")));
                }
            }
        }
        hierarchy_order(&self.lambda)?;
        let total = self.lambda.sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::validation("lambda", None, format!("entries sum to {total}, expected 1")));
        }
        let marginal = self.answer_marginal();
        for (a, &p) in marginal.iter().enumerate() {
            if p <= 0.0 {
                return Err(Error::validation("answers", Some(vec![a]), format!("answer {:?} has zero marginal probability", self.answers[a])));
            }
        }
        Ok(())
    }

    pub fn answers(&self) -> &[String] {
        &self.answers
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn prediction_count(&self) -> &PredictionCount {
        &self.prediction_count
    }

    /// A type ordering (most sophisticated first) under which `lambda` is
    /// upper-triangular. Ties keep the stored order.
    pub fn hierarchy(&self) -> Vec<usize> {
        hierarchy_order(&self.lambda).expect("validated lambda admits a hierarchy")
    }

    /// `p_t`, the row sums of `lambda`.
    pub fn type_probabilities(&self) -> Vec<f64> {
        self.lambda.row_iter().map(|r| r.sum()).collect()
    }

    /// `p_a = sum_t p_t w_t(a)`.
    pub fn answer_marginal(&self) -> Vec<f64> {
        let pt = self.type_probabilities();
        (0..self.answers.len())
            .map(|a| (0..self.types.len()).map(|t| pt[t] * self.w[(t, a)]).sum())
            .collect()
    }
}

fn check_unique(field: &str, labels: &[String]) -> Result<()> {
    for (i, label) in labels.iter().enumerate() {
        if let Some(j) = labels[..i].iter().position(|l| l == label) {
            return Err(Error::validation(field, Some(vec![i]), format!("duplicate label {label:?} (also at {j})")));
        }
    }
    Ok(())
}

/// Topological order of the "predicts" relation `t -> u` (`lambda[t][u] > 0`, `t != u`).
/// A cycle means no ordering makes `lambda` upper-triangular.
fn hierarchy_order(lambda: &DMatrix<f64>) -> Result<Vec<usize>> {
    let n = lambda.nrows();
    // A type can be placed once every type predicting it is placed.
    let mut pending: Vec<usize> = (0..n)
        .map(|u| (0..n).filter(|&t| t != u && lambda[(t, u)] != 0.0).count())
        .collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let Some(t) = (0..n).find(|&t| !placed[t] && pending[t] == 0) else {
            let (t, u) = (0..n)
                .flat_map(|t| (0..n).map(move |u| (t, u)))
                .find(|&(t, u)| !placed[t] && !placed[u] && t != u && lambda[(t, u)] != 0.0)
                .expect("an unplaced type has an unplaced predecessor");
            return Err(Error::validation(
                "lambda",
                Some(vec![t, u]),
                "types predict each other in a cycle; no ordering makes lambda upper-triangular",
            ));
        };
        placed[t] = true;
        order.push(t);
        for u in 0..n {
            if u != t && lambda[(t, u)] != 0.0 {
                pending[u] -= 1;
            }
        }
    }
    Ok(order)
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Joint answer/prediction distribution `M` over a labelled answer set.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMatrix {
    pub answers: Vec<String>,
    pub m: DMatrix<f64>,
}

impl JointMatrix {
    pub fn from_rows(answers: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = answers.len();
        if rows.len() != n {
            return Err(Error::NotSquare { rows: rows.len(), cols: n });
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::validation("m", Some(vec![i]), format!("has {} entries, expected {n}", r.len())));
        }
        Ok(JointMatrix {
            answers,
            m: DMatrix::from_fn(n, n, |i, j| rows[i][j]),
        })
    }

    /// Row sums, i.e. the answer marginal `p_a` when `m` is the exact joint.
    pub fn row_sums(&self) -> Vec<f64> {
        self.m.row_iter().map(|r| r.sum()).collect()
    }
}

/// `W^T Lambda W` for arbitrary (not necessarily stochastic) factors.
///
/// Each cell sums the `|T|^2` products `w[t][a] * lambda[t][u] * w[u][g]` in sorted
/// order, so the result is bit-identical under any relabelling of types.
pub fn congruence(w: &DMatrix<f64>, lambda: &DMatrix<f64>) -> DMatrix<f64> {
    let (n_types, n_answers) = w.shape();
    assert_eq!(lambda.shape(), (n_types, n_types), "lambda must be |T|x|T|");
    let mut terms = Vec::with_capacity(n_types * n_types);
    DMatrix::from_fn(n_answers, n_answers, |a, g| {
        terms.clear();
        for t in 0..n_types {
            for u in 0..n_types {
                terms.push(w[(t, a)] * lambda[(t, u)] * w[(u, g)]);
            }
        }
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    })
}

/// The exact joint `M = W^T Lambda W` of a model.
pub fn compute_joint(model: &ThinkingModel) -> JointMatrix {
    JointMatrix {
        answers: model.answers.clone(),
        m: congruence(&model.w, &model.lambda),
    }
}

struct Sampler {
    type_dist: WeightedIndex<f64>,
    answer_dist: Vec<WeightedIndex<f64>>,
    /// `None` for types with zero probability, which are never drawn.
    predict_dist: Vec<Option<WeightedIndex<f64>>>,
    count_dist: Option<(Vec<u32>, WeightedIndex<f64>)>,
}

impl Sampler {
    fn new(model: &ThinkingModel) -> Self {
        let pt = model.type_probabilities();
        let type_dist = WeightedIndex::new(&pt).expect("validated lambda has positive mass");
        // A type row of w always sums to 1, so each is a valid distribution.
        let answer_dist = model
            .w
            .row_iter()
            .map(|r| WeightedIndex::new(r.iter().copied()).expect("validated w row"))
            .collect();
        let predict_dist = model
            .lambda
            .row_iter()
            .map(|r| WeightedIndex::new(r.iter().copied()).ok())
            .collect();
        let count_dist = match &model.prediction_count {
            PredictionCount::Point(_) => None,
            PredictionCount::Categorical(probs) => {
                let counts = probs.iter().map(|(k, _)| *k).collect();
                let dist = WeightedIndex::new(probs.iter().map(|(_, p)| *p)).expect("validated prediction_count");
                Some((counts, dist))
            }
        };
        Sampler {
            type_dist,
            answer_dist,
            predict_dist,
            count_dist,
        }
    }
}

/// Draws `n` respondents from `model`; `(model, n, seed)` fully determines the output.
pub fn sample_dataset(model: &ThinkingModel, n: usize, seed: u64) -> Vec<ResponseRecord> {
    sample_question(model, n, seed, SIMULATED_QUESTION_ID)
}

pub fn sample_question(model: &ThinkingModel, n: usize, seed: u64, question_id: &str) -> Vec<ResponseRecord> {
    let sampler = Sampler::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fixed_count = match model.prediction_count {
        PredictionCount::Point(k) => k as usize,
        PredictionCount::Categorical(_) => 0,
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = sampler.type_dist.sample(&mut rng);
        let a = sampler.answer_dist[t].sample(&mut rng);
        let k = match &sampler.count_dist {
            None => fixed_count,
            Some((counts, dist)) => counts[dist.sample(&mut rng)] as usize,
        };
        let mut predictions = Vec::with_capacity(k);
        if k > 0 {
            let predict = sampler.predict_dist[t]
                .as_ref()
                .expect("a drawn type has positive row mass");
            for _ in 0..k {
                let u = predict.sample(&mut rng);
                let g = sampler.answer_dist[u].sample(&mut rng);
                predictions.push(model.answers[g].clone());
            }
        }
        out.push(ResponseRecord {
            respondent_id: format!("r{}", i + 1),
            question_id: question_id.to_string(),
            answer: model.answers[a].clone(),
            predictions,
        });
    }
    out
}

/// Tabulates `records` over the model's answers (no thresholding), normalizes to
/// total mass 1 and returns the max-abs deviation from the exact joint.
pub fn expected_matrix_proportionality(model: &ThinkingModel, records: &[ResponseRecord]) -> Result<f64> {
    let n = model.answers.len();
    let index = |label: &str| model.answers.iter().position(|a| a == label);
    let mut counts = DMatrix::<f64>::zeros(n, n);
    let mut total = 0u64;
    for (i, rec) in records.iter().enumerate() {
        let a = index(&rec.answer).ok_or_else(|| {
            Error::validation("records", Some(vec![i]), format!("answer {:?} is not in the model", rec.answer))
        })?;
        for g_label in &rec.predictions {
            let g = index(g_label).ok_or_else(|| {
                Error::validation("records", Some(vec![i]), format!("prediction {g_label:?} is not in the model"))
            })?;
            counts[(a, g)] += 1.0;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoPredictionMass);
    }
    let empirical = counts / total as f64;
    let exact = compute_joint(model).m;
    Ok((empirical - exact).amax())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn running_example() -> ThinkingModel {
        ThinkingModel::new(
            vec!["3".into(), "4".into(), "6".into()],
            vec!["0".into(), "1".into()],
            DMatrix::from_row_slice(2, 3, &[0.8, 0.0, 0.2, 0.0, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.15, 0.15]),
            PredictionCount::Point(1),
        )
        .unwrap()
    }

    /// Plain triple loop, kept separate from `congruence`.
    fn naive_joint(w: &[[f64; 3]; 2], lambda: &[[f64; 2]; 2]) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for g in 0..3 {
                for t in 0..2 {
                    for u in 0..2 {
                        m[a][g] += w[t][a] * lambda[t][u] * w[u][g];
                    }
                }
            }
        }
        m
    }

    #[test]
    fn running_example_joint() {
        let model = running_example();
        let joint = compute_joint(&model);
        let oracle = naive_joint(&[[0.8, 0.0, 0.2], [0.0, 1.0, 0.0]], &[[0.7, 0.0], [0.15, 0.15]]);
        let expected = [[0.448, 0.0, 0.112], [0.12, 0.15, 0.03], [0.112, 0.0, 0.028]];
        for a in 0..3 {
            for g in 0..3 {
                assert!((oracle[a][g] - expected[a][g]).abs() < 1e-15);
                assert!((joint.m[(a, g)] - expected[a][g]).abs() < 1e-15, "cell ({a},{g})");
            }
        }
        assert!((joint.m.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_w_gives_diagonal_joint() {
        let p = [0.5, 0.3, 0.2];
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let model = ThinkingModel::new(
            labels.clone(),
            labels,
            DMatrix::identity(3, 3),
            DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&p)),
            PredictionCount::Point(1),
        )
        .unwrap();
        let joint = compute_joint(&model);
        assert_eq!(joint.m, DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&p)));
    }

    #[test]
    fn row_sums_match_answer_marginal() {
        let model = running_example();
        let joint = compute_joint(&model);
        for (r, p) in joint.row_sums().iter().zip(model.answer_marginal()) {
            assert!((r - p).abs() < 1e-12);
        }
        let expected = [0.56, 0.30, 0.14];
        for (p, e) in model.answer_marginal().iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_models() {
        let base = running_example().to_spec();

        let mut spec = base.clone();
        spec.w[0][1] = 0.1;
        let err = ThinkingModel::from_spec(&spec).unwrap_err();
        assert_eq!(err.to_string(), "invalid w[0]: row sums to 1.1, expected 1");

        let mut spec = base.clone();
        spec.w[1][2] = -0.0001;
        spec.w[1][1] = 1.0001;
        let err = ThinkingModel::from_spec(&spec).unwrap_err();
        assert!(err.to_string().starts_with("invalid w[1][2]"), "{err}");

        // Type 0 now also predicts type 1: a cycle.
        let mut spec = base.clone();
        spec.lambda[0][1] = 0.1;
        spec.lambda[0][0] = 0.6;
        let err = ThinkingModel::from_spec(&spec).unwrap_err();
        assert!(err.to_string().starts_with("invalid lambda[0][1]"), "{err}");

        let mut spec = base.clone();
        spec.lambda[1][1] = 0.5;
        let err = ThinkingModel::from_spec(&spec).unwrap_err();
        assert!(err.to_string().starts_with("invalid lambda:"), "{err}");

        // Answer "6" never produced by any type.
        let mut spec = base.clone();
        spec.w[0] = vec![1.0, 0.0, 0.0];
        let err = ThinkingModel::from_spec(&spec).unwrap_err();
        assert!(err.to_string().starts_with("invalid answers[2]"), "{err}");

        let mut spec = base;
        spec.prediction_count = PredictionCountSpec::Categorical {
            probs: [("1".to_string(), 0.5), ("2".to_string(), 0.4)].into_iter().collect(),
        };
        let err = ThinkingModel::from_spec(&spec).unwrap_err();
        assert!(err.to_string().starts_with("invalid prediction_count.probs"), "{err}");
    }

    #[test]
    fn model_json_round_trip() {
        let text = r#"{
            "answers": ["3", "4", "6"],
            "types": ["0", "1"],
            "w": [[0.8, 0, 0.2], [0, 1, 0]],
            "lambda": [[0.7, 0], [0.15, 0.15]],
            "prediction_count": {"kind": "categorical", "probs": {"1": 0.25, "3": 0.75}}
        }"#;
        let model = ThinkingModel::from_json(text).unwrap();
        assert_eq!(
            model.prediction_count(),
            &PredictionCount::Categorical(vec![(1, 0.25), (3, 0.75)])
        );
        assert!((model.prediction_count().mean() - 2.5).abs() < 1e-15);
        let again = ThinkingModel::from_spec(&model.to_spec()).unwrap();
        assert_eq!(model, again);

        let no_count = r#"{"answers":["x"],"types":["t"],"w":[[1]],"lambda":[[1]]}"#;
        let model = ThinkingModel::from_json(no_count).unwrap();
        assert_eq!(model.prediction_count(), &PredictionCount::Point(1));
    }

    #[test]
    fn single_answer_model_is_deterministic() {
        let model = ThinkingModel::new(
            vec!["x".into()],
            vec!["t".into()],
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            PredictionCount::Point(1),
        )
        .unwrap();
        for rec in sample_dataset(&model, 50, 3) {
            assert_eq!(rec.answer, "x");
            assert_eq!(rec.predictions, vec!["x".to_string()]);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let model = running_example();
        let a = sample_dataset(&model, 500, 42);
        let b = sample_dataset(&model, 500, 42);
        let c = sample_dataset(&model, 500, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_answer_marginal_close_to_p() {
        let model = running_example();
        let records = sample_dataset(&model, 100_000, 7);
        let p = model.answer_marginal();
        for (i, label) in model.answers().iter().enumerate() {
            let freq = records.iter().filter(|r| &r.answer == label).count() as f64 / records.len() as f64;
            assert!((freq - p[i]).abs() < 0.01, "{label}: {freq} vs {}", p[i]);
        }
    }

    #[test]
    fn exact_tabulation_has_zero_deviation() {
        // Counts 1000 * M: integers, so the normalized table is M exactly.
        let model = running_example();
        let joint = compute_joint(&model);
        let mut records = Vec::new();
        for a in 0..3 {
            for g in 0..3 {
                let count = (joint.m[(a, g)] * 1000.0).round() as usize;
                for _ in 0..count {
                    records.push(ResponseRecord {
                        respondent_id: String::new(),
                        question_id: "q".into(),
                        answer: model.answers()[a].clone(),
                        predictions: vec![model.answers()[g].clone()],
                    });
                }
            }
        }
        assert_eq!(records.len(), 1000);
        let dev = expected_matrix_proportionality(&model, &records).unwrap();
        assert!(dev < 1e-15, "{dev}");
    }

    #[test]
    fn no_predictions_is_an_error() {
        let model = running_example().with_prediction_count(PredictionCount::Point(0)).unwrap();
        let records = sample_dataset(&model, 10, 1);
        assert!(records.iter().all(|r| r.predictions.is_empty()));
        assert_eq!(expected_matrix_proportionality(&model, &records), Err(Error::NoPredictionMass));
    }

    #[test]
    fn multiple_predictions_keep_proportionality() {
        let model = running_example();
        let one = sample_dataset(&model, 200_000, 11);
        let three = sample_dataset(&model.with_prediction_count(PredictionCount::Point(3)).unwrap(), 200_000, 11);
        assert!(three.iter().all(|r| r.predictions.len() == 3));
        let d1 = expected_matrix_proportionality(&model, &one).unwrap();
        let d3 = expected_matrix_proportionality(&model, &three).unwrap();
        assert!(d1 <= 0.01 && d3 <= 0.01, "{d1} {d3}");
    }

    fn stochastic_rows(raw: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        raw.into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|x| x / s).collect()
            })
            .collect()
    }

    prop_compose! {
        fn arb_factors()(n_types in 1usize..5, n_answers in 1usize..6)
            (w in prop::collection::vec(prop::collection::vec(0.01f64..1.0, n_answers), n_types),
             lambda in prop::collection::vec(prop::collection::vec(0.0f64..1.0, n_types), n_types),
             scale in prop::collection::vec(0.2f64..5.0, n_types))
            -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)
        {
            let mut lambda = lambda;
            for (t, row) in lambda.iter_mut().enumerate() {
                for (u, v) in row.iter_mut().enumerate() {
                    if t > u { *v = 0.0; }
                    if t == u { *v += 0.05; }
                }
            }
            (stochastic_rows(w), lambda, scale)
        }
    }

    fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    proptest! {
        #[test]
        fn diagonal_rescaling_preserves_joint((w, lambda, scale) in arb_factors()) {
            let w = to_matrix(&w);
            let lambda = to_matrix(&lambda);
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(scale.clone()));
            let d_inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(scale.len(), scale.iter().map(|s| 1.0 / s)));
            let base = congruence(&w, &lambda);
            let scaled = congruence(&(&d * &w), &(&d_inv * &lambda * &d_inv));
            prop_assert!((base - scaled).amax() <= 1e-12);
        }

        #[test]
        fn hierarchy_preserving_relabel_is_bit_identical((w, lambda, _scale) in arb_factors(), seed in any::<u64>()) {
            // Zero out everything but the diagonal for a pair of adjacent types so swapping
            // them keeps lambda upper-triangular, then compare bits.
            let n = lambda.len();
            let mut lambda = lambda;
            let k = (seed as usize) % n;
            let swap = if k + 1 < n { Some((k, k + 1)) } else { None };
            if let Some((i, j)) = swap {
                lambda[i][j] = 0.0;
            }
            let total: f64 = lambda.iter().flatten().sum();
            let lambda: Vec<Vec<f64>> = lambda.into_iter().map(|r| r.into_iter().map(|x| x / total).collect()).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            if let Some((i, j)) = swap {
                perm.swap(i, j);
            }
            let w_m = to_matrix(&w);
            let l_m = to_matrix(&lambda);
            let w_p = DMatrix::from_fn(n, w_m.ncols(), |t, a| w_m[(perm[t], a)]);
            let l_p = DMatrix::from_fn(n, n, |t, u| l_m[(perm[t], perm[u])]);
            for t in 0..n {
                for u in 0..t {
                    prop_assert_eq!(l_p[(t, u)], 0.0);
                }
            }
            let base = congruence(&w_m, &l_m);
            let relabelled = congruence(&w_p, &l_p);
            prop_assert_eq!(base, relabelled);
        }

        #[test]
        fn joint_sums_to_one((w, lambda, _scale) in arb_factors()) {
            let total: f64 = lambda.iter().flatten().sum();
            let lambda: Vec<Vec<f64>> = lambda.into_iter().map(|r| r.into_iter().map(|x| x / total).collect()).collect();
            let n_types = lambda.len();
            let n_answers = w[0].len();
            let model = ThinkingModel::new(
                (0..n_answers).map(|a| format!("a{a}")).collect(),
                (0..n_types).map(|t| format!("t{t}")).collect(),
                to_matrix(&w),
                to_matrix(&lambda),
                PredictionCount::Point(1),
            )
            .unwrap();
            let joint = compute_joint(&model);
            prop_assert!((joint.m.sum() - 1.0).abs() <= 1e-12);
            for (r, p) in joint.row_sums().iter().zip(model.answer_marginal()) {
                prop_assert!((r - p).abs() <= 1e-12);
            }
        }
    }
}
