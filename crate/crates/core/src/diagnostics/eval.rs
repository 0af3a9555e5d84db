//! Batch evaluation against optional ground truth.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::ingest::{build_matrix, canonicalize, ResponseRecord};
use crate::report::analyze;

pub const EVAL_SCHEMA: &str = "eval/1";

/// One question's responses and, optionally, its correct answer.
#[derive(Debug, Clone)]
pub struct Question {
    pub question_id: String,
    pub records: Vec<ResponseRecord>,
    pub truth: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionResult {
    pub question_id: String,
    pub n_respondents: u64,
    pub answers: Vec<String>,
    pub plurality_answer: Option<String>,
    pub default_top: Option<String>,
    pub variant_top: Option<String>,
    /// Canonicalized truth label.
    pub truth: Option<String>,
    pub lack_of_fit_raw: Option<f64>,
    pub lack_of_fit_normalized: Option<f64>,
    pub plurality_correct: Option<bool>,
    pub default_correct: Option<bool>,
    pub variant_correct: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub questions: usize,
    pub errors: usize,
    /// Questions with a truth label and a successful analysis.
    pub scored: usize,
    pub plurality_correct: usize,
    pub default_correct: usize,
    pub variant_correct: usize,
    pub plurality_accuracy: Option<f64>,
    pub default_accuracy: Option<f64>,
    pub variant_accuracy: Option<f64>,
    /// Mean normalized lack-of-fit over scored questions the default ranker got right.
    pub mean_lack_of_fit_correct: Option<f64>,
    pub mean_lack_of_fit_incorrect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub schema: &'static str,
    pub questions: Vec<QuestionResult>,
    pub aggregate: Aggregate,
}

impl EvalResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

fn evaluate_one(q: &Question, config: &RunConfig) -> QuestionResult {
    let truth = q.truth.as_deref().map(|t| canonicalize(t, &config.canonicalization));
    let mut out = QuestionResult {
        question_id: q.question_id.clone(),
        n_respondents: q.records.len() as u64,
        answers: Vec::new(),
        plurality_answer: None,
        default_top: None,
        variant_top: None,
        truth: truth.clone(),
        lack_of_fit_raw: None,
        lack_of_fit_normalized: None,
        plurality_correct: None,
        default_correct: None,
        variant_correct: None,
        error: None,
    };
    let analysis = build_matrix(&q.records, &config.canonicalization, &config.ingest_options())
        .and_then(|m| analyze(m, config));
    let a = match analysis {
        Ok(a) => a,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.answers = a.matrix.answers.clone();
    out.plurality_answer = Some(a.plurality.clone());
    out.default_top = a.default_top().map(String::from);
    out.variant_top = a.variant_top().map(String::from);
    if let Some(fit) = a.primary_fit() {
        out.lack_of_fit_raw = Some(fit.lack_of_fit_raw);
        out.lack_of_fit_normalized = Some(fit.lack_of_fit_normalized);
    }
    if let Some(t) = &truth {
        let hit = |x: &Option<String>| x.as_ref().map(|x| x == t);
        out.plurality_correct = hit(&out.plurality_answer);
        out.default_correct = hit(&out.default_top);
        out.variant_correct = hit(&out.variant_top);
    }
    out
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn aggregate(results: &[QuestionResult]) -> Aggregate {
    let count = |f: fn(&QuestionResult) -> Option<bool>| results.iter().filter(|r| f(r) == Some(true)).count();
    let scored = results
        .iter()
        .filter(|r| r.error.is_none() && r.truth.is_some())
        .count();
    let accuracy = |n: usize, f: fn(&QuestionResult) -> Option<bool>| {
        let denom = results.iter().filter(|r| f(r).is_some()).count();
        (denom > 0).then(|| n as f64 / denom as f64)
    };
    let plurality_correct = count(|r| r.plurality_correct);
    let default_correct = count(|r| r.default_correct);
    let variant_correct = count(|r| r.variant_correct);
    let lof_split = |want: bool| -> Vec<f64> {
        results
            .iter()
            .filter(|r| r.default_correct == Some(want))
            .filter_map(|r| r.lack_of_fit_normalized)
            .collect()
    };
    Aggregate {
        questions: results.len(),
        errors: results.iter().filter(|r| r.error.is_some()).count(),
        scored,
        plurality_correct,
        default_correct,
        variant_correct,
        plurality_accuracy: accuracy(plurality_correct, |r| r.plurality_correct),
        default_accuracy: accuracy(default_correct, |r| r.default_correct),
        variant_accuracy: accuracy(variant_correct, |r| r.variant_correct),
        mean_lack_of_fit_correct: mean(&lof_split(true)),
        mean_lack_of_fit_incorrect: mean(&lof_split(false)),
    }
}

/// Runs ingestion, both rankers and plurality on every question independently.
/// Per-question failures are recorded in the result rather than aborting the batch.
/// Questions are processed on the current rayon pool; output follows input order.
pub fn evaluate(questions: &[Question], config: &RunConfig) -> EvalResult {
    let results: Vec<QuestionResult> = questions.par_iter().map(|q| evaluate_one(q, config)).collect();
    EvalResult {
        schema: EVAL_SCHEMA,
        aggregate: aggregate(&results),
        questions: results,
    }
}
