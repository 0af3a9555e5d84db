//! Survey ingestion: response CSV, answer canonicalization and the answer-prediction
//! count matrix.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::JointMatrix;

pub const DEFAULT_THRESHOLD: f64 = 0.03;
pub const DEFAULT_DONT_KNOW: &str = "IDK";

/// Column order of the responses CSV.
pub const CSV_HEADER: [&str; 4] = ["respondent_id", "question_id", "answer", "predictions"];

/// One respondent's raw feedback to one question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseRecord {
    pub respondent_id: String,
    pub question_id: String,
    pub answer: String,
    pub predictions: Vec<String>,
}

/// Reads a responses CSV. The header is required and must match [`CSV_HEADER`].
/// Errors carry the 1-based line number.
pub fn read_responses_csv<R: Read>(reader: R) -> Result<Vec<ResponseRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty input, expected a header row".into(),
            })
        }
        Some(h) => h.map_err(csv_error)?,
    };
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", CSV_HEADER.join(","), got.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != CSV_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()),
            });
        }
        let answer = row[2].to_string();
        if answer.trim().is_empty() {
            return Err(Error::Parse {
                line,
                message: "answer is empty".into(),
            });
        }
        out.push(ResponseRecord {
            respondent_id: row[0].to_string(),
            question_id: row[1].to_string(),
            answer,
            predictions: split_predictions(&row[3]),
        });
    }
    Ok(out)
}

fn split_predictions(field: &str) -> Vec<String> {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn write_responses_csv<W: Write>(writer: W, records: &[ResponseRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wtr.write_record(CSV_HEADER).map_err(io)?;
    for rec in records {
        let predictions = rec.predictions.join(";");
        wtr.write_record([
            rec.respondent_id.as_str(),
            rec.question_id.as_str(),
            rec.answer.as_str(),
            predictions.as_str(),
        ])
        .map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// JSON form of a [`CanonicalizationMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalizationSpec {
    #[serde(default = "yes")]
    pub numeric_percent_to_fraction: bool,
    #[serde(default = "yes")]
    pub case_fold: bool,
    #[serde(default)]
    pub synonyms: BTreeMap<String, String>,
}

fn yes() -> bool {
    true
}

impl Default for CanonicalizationSpec {
    fn default() -> Self {
        CanonicalizationSpec {
            numeric_percent_to_fraction: true,
            case_fold: true,
            synonyms: BTreeMap::new(),
        }
    }
}

/// Rewrites raw answers to canonical labels so that equivalent answers merge.
///
/// A raw string is trimmed, case-folded and passed through the numeric rules
/// (`"50%"` -> `"0.5"`, `"0.50"` -> `"0.5"`); the result is then looked up in the
/// synonym table. Synonym targets are returned verbatim and are fixed points, so
/// canonicalization is idempotent.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalizationMap {
    spec: CanonicalizationSpec,
    /// base form of a synonym key -> resolved target
    keys: HashMap<String, String>,
    /// base form of a target -> target
    targets: HashMap<String, String>,
}

impl Default for CanonicalizationMap {
    fn default() -> Self {
        CanonicalizationMap::new(CanonicalizationSpec::default()).expect("empty synonym table")
    }
}

impl CanonicalizationMap {
    pub fn new(spec: CanonicalizationSpec) -> Result<Self> {
        let mut map = CanonicalizationMap {
            spec,
            keys: HashMap::new(),
            targets: HashMap::new(),
        };
        let mut direct: HashMap<String, String> = HashMap::new();
        for (key, target) in &map.spec.synonyms {
            let target = target.trim().to_string();
            if target.is_empty() {
                return Err(Error::validation("synonyms", None, format!("empty target for {key:?}")));
            }
            let base = map.base(key);
            if let Some(prev) = direct.insert(base.clone(), target.clone()) {
                if prev != target {
                    return Err(Error::validation(
                        "synonyms",
                        None,
                        format!("{base:?} maps to both {prev:?} and {target:?}"),
                    ));
                }
            }
        }
        for start in direct.keys() {
            let mut seen = vec![start.clone()];
            let mut target = direct[start].clone();
            loop {
                let next_base = map.base(&target);
                match direct.get(&next_base) {
                    Some(next) if *next != target => {
                        if seen.contains(&next_base) {
                            return Err(Error::validation(
                                "synonyms",
                                None,
                                format!("cycle through {start:?}"),
                            ));
                        }
                        seen.push(next_base);
                        target = next.clone();
                    }
                    _ => break,
                }
            }
            map.keys.insert(start.clone(), target);
        }
        for target in map.keys.values() {
            let base = map.base(target);
            if let Some(prev) = map.targets.get(&base) {
                if prev != target {
                    return Err(Error::validation(
                        "synonyms",
                        None,
                        format!("targets {prev:?} and {target:?} are indistinguishable"),
                    ));
                }
            }
            map.targets.insert(base, target.clone());
        }
        Ok(map)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: CanonicalizationSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        CanonicalizationMap::new(spec)
    }

    pub fn spec(&self) -> &CanonicalizationSpec {
        &self.spec
    }

    fn base(&self, raw: &str) -> String {
        let trimmed = raw.trim();
        let folded = if self.spec.case_fold {
            trimmed.to_lowercase()
        } else {
            trimmed.to_string()
        };
        if self.spec.numeric_percent_to_fraction {
            if let Some(n) = normalize_numeric(&folded) {
                return n;
            }
        }
        folded
    }
}

pub fn canonicalize(raw: &str, map: &CanonicalizationMap) -> String {
    let base = map.base(raw);
    if let Some(t) = map.keys.get(&base).or_else(|| map.targets.get(&base)) {
        return t.clone();
    }
    base
}

/// Digits of a plain decimal: sign, integer part, fractional part.
fn parse_decimal(s: &str) -> Option<(bool, &str, &str)> {
    let (neg, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    let digits = |x: &str| x.bytes().all(|b| b.is_ascii_digit());
    if int.is_empty() && frac.is_empty() || !digits(int) || !digits(frac) {
        return None;
    }
    if body.ends_with('.') && frac.is_empty() && int.is_empty() {
        return None;
    }
    Some((neg, int, frac))
}

fn format_decimal(neg: bool, int: &str, frac: &str) -> String {
    let int = int.trim_start_matches('0');
    let frac = frac.trim_end_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    let zero = int == "0" && frac.is_empty();
    let mut out = String::new();
    if neg && !zero {
        out.push('-');
    }
    out.push_str(int);
    if !frac.is_empty() {
        out.push('.');
        out.push_str(frac);
    }
    out
}

/// `"50%"` -> `"0.5"`, `"12.50"` -> `"12.5"`; `None` for non-numeric strings.
/// Works on the decimal digits directly so no binary rounding leaks in.
fn normalize_numeric(s: &str) -> Option<String> {
    if let Some(body) = s.strip_suffix('%') {
        let (neg, int, frac) = parse_decimal(body.trim_end())?;
        let digits = format!("{int}{frac}");
        let point = int.len() as isize - 2;
        let (i, f) = if point <= 0 {
            (String::new(), format!("{}{}", "0".repeat((-point) as usize), digits))
        } else {
            let p = point as usize;
            (digits[..p].to_string(), digits[p..].to_string())
        };
        return Some(format_decimal(neg, &i, &f));
    }
    let (neg, int, frac) = parse_decimal(s)?;
    Some(format_decimal(neg, int, frac))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionPolicy {
    #[default]
    All,
    /// Count only the first prediction that lands in the retained answer set.
    FirstOnly,
}

impl FromStr for PredictionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(PredictionPolicy::All),
            "first_only" => Ok(PredictionPolicy::FirstOnly),
            other => Err(Error::validation("prediction_policy", None, format!("unknown policy {other:?}"))),
        }
    }
}

impl fmt::Display for PredictionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictionPolicy::All => "all",
            PredictionPolicy::FirstOnly => "first_only",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    /// Answers with support at or below this fraction of answering respondents are dropped.
    pub threshold: f64,
    pub dont_know_token: String,
    pub prediction_policy: PredictionPolicy,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            threshold: DEFAULT_THRESHOLD,
            dont_know_token: DEFAULT_DONT_KNOW.to_string(),
            prediction_policy: PredictionPolicy::All,
        }
    }
}

/// Counts of (answer, prediction) pairs over the retained answers of one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerPredictionMatrix {
    pub answers: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub support: Vec<u64>,
    pub n_respondents: u64,
    /// Predictions from retained-answer respondents that named no retained answer.
    /// Not part of the JSON form.
    #[serde(skip)]
    pub dropped_predictions: u64,
}

impl AnswerPredictionMatrix {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: AnswerPredictionMatrix = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    /// Canonical JSON: fixed key order, answers in stored order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.answers.len();
        if n == 0 {
            return Err(Error::validation("answers", None, "is empty"));
        }
        for (i, label) in self.answers.iter().enumerate() {
            if self.answers[..i].contains(label) {
                return Err(Error::validation("answers", Some(vec![i]), format!("duplicate label {label:?}")));
            }
        }
        if self.counts.len() != n {
            return Err(Error::NotSquare {
                rows: self.counts.len(),
                cols: n,
            });
        }
        for (i, row) in self.counts.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation("counts", Some(vec![i]), format!("has {} entries, expected {n}", row.len())));
            }
        }
        if self.support.len() != n {
            return Err(Error::validation("support", None, format!("has {} entries, expected {n}", self.support.len())));
        }
        let total: u64 = self.support.iter().sum();
        if total > self.n_respondents {
            return Err(Error::validation(
                "n_respondents",
                None,
                format!("{} is less than total support {total}", self.n_respondents),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.counts[i][j] as f64)
    }

    /// Empirical answer frequencies `support / sum(support)`.
    pub fn support_frequencies(&self) -> Vec<f64> {
        let total: u64 = self.support.iter().sum();
        self.support.iter().map(|&s| s as f64 / total as f64).collect()
    }

    /// Frequencies from matrix row sums (prediction volume per answer).
    pub fn row_sum_frequencies(&self) -> Vec<f64> {
        let total = self.total_count() as f64;
        self.counts
            .iter()
            .map(|r| r.iter().sum::<u64>() as f64 / total)
            .collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.answers.iter().position(|a| a == label)
    }
}

/// Tabulates one question's responses into an answer-prediction matrix.
///
/// Don't-know answers count toward `n_respondents` only. An answer is retained when
/// its support is above one person and above `threshold` times the number of
/// respondents who gave a real answer. Retained answers are ordered by support
/// (descending) then label.
pub fn build_matrix(
    records: &[ResponseRecord],
    map: &CanonicalizationMap,
    options: &IngestOptions,
) -> Result<AnswerPredictionMatrix> {
    if !(0.0..1.0).contains(&options.threshold) {
        return Err(Error::validation("threshold", None, format!("{} is outside [0, 1)", options.threshold)));
    }
    if let Some(first) = records.first() {
        if let Some(other) = records.iter().find(|r| r.question_id != first.question_id) {
            return Err(Error::MixedQuestionIds {
                first: first.question_id.clone(),
                other: other.question_id.clone(),
            });
        }
    }
    let dont_know = canonicalize(&options.dont_know_token, map);
    let mut answers = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        if rec.answer.trim().is_empty() {
            return Err(Error::validation("records", Some(vec![i]), "answer is empty"));
        }
        let a = canonicalize(&rec.answer, map);
        answers.push((a != dont_know).then_some(a));
    }

    let mut support: BTreeMap<&str, u64> = BTreeMap::new();
    for a in answers.iter().flatten() {
        *support.entry(a.as_str()).or_default() += 1;
    }
    let answering: u64 = support.values().sum();
    let cutoff = options.threshold * answering as f64;
    let mut retained: Vec<(&str, u64)> = support
        .into_iter()
        .filter(|&(_, s)| s > 1 && s as f64 > cutoff)
        .collect();
    if retained.is_empty() {
        return Err(Error::NoAnswerSurvives);
    }
    retained.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let index: HashMap<&str, usize> = retained.iter().enumerate().map(|(i, (a, _))| (*a, i)).collect();

    let n = retained.len();
    let mut counts = vec![vec![0u64; n]; n];
    let mut dropped = 0u64;
    for (rec, answer) in records.iter().zip(&answers) {
        let Some(&a) = answer.as_deref().and_then(|x| index.get(x)) else {
            continue;
        };
        for raw in &rec.predictions {
            if raw.trim().is_empty() {
                continue;
            }
            match index.get(canonicalize(raw, map).as_str()) {
                Some(&g) => {
                    counts[a][g] += 1;
                    if options.prediction_policy == PredictionPolicy::FirstOnly {
                        break;
                    }
                }
                None => dropped += 1,
            }
        }
    }

    Ok(AnswerPredictionMatrix {
        answers: retained.iter().map(|(a, _)| a.to_string()).collect(),
        counts,
        support: retained.iter().map(|(_, s)| *s).collect(),
        n_respondents: records.len() as u64,
        dropped_predictions: dropped,
    })
}

/// Divides counts by their total, giving an empirical joint over the same answers.
pub fn normalize(matrix: &AnswerPredictionMatrix) -> Result<JointMatrix> {
    let total = matrix.total_count();
    if total == 0 {
        return Err(Error::NoPredictionsRecorded);
    }
    Ok(JointMatrix {
        answers: matrix.answers.clone(),
        m: matrix.to_dense() / total as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(answer: &str, predictions: &[&str]) -> ResponseRecord {
        ResponseRecord {
            respondent_id: String::new(),
            question_id: "q".into(),
            answer: answer.into(),
            predictions: predictions.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn with_synonyms(pairs: &[(&str, &str)]) -> Result<CanonicalizationMap> {
        CanonicalizationMap::new(CanonicalizationSpec {
            synonyms: pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            ..Default::default()
        })
    }

    #[test]
    fn percent_merges_with_fraction() {
        let map = CanonicalizationMap::default();
        assert_eq!(canonicalize("50%", &map), "0.5");
        assert_eq!(canonicalize("0.5", &map), "0.5");
        assert_eq!(canonicalize(" 0.50 ", &map), "0.5");
        assert_eq!(canonicalize("100%", &map), "1");
        assert_eq!(canonicalize("5%", &map), "0.05");
        assert_eq!(canonicalize("33.3 %", &map), "0.333");
        assert_eq!(canonicalize("0%", &map), "0");
        assert_eq!(canonicalize("-0", &map), "0");
        assert_eq!(canonicalize(".5", &map), "0.5");
        assert_eq!(canonicalize("007", &map), "7");
        assert_eq!(canonicalize("1.2.3", &map), "1.2.3");
        assert_eq!(canonicalize("%", &map), "%");
        assert_eq!(canonicalize("Yi1", &map), "yi1");
    }

    #[test]
    fn rules_can_be_disabled() {
        let map = CanonicalizationMap::new(CanonicalizationSpec {
            numeric_percent_to_fraction: false,
            case_fold: false,
            synonyms: BTreeMap::new(),
        })
        .unwrap();
        assert_eq!(canonicalize(" 50% ", &map), "50%");
        assert_eq!(canonicalize("Yalu", &map), "Yalu");
    }

    #[test]
    fn synonym_lookup() {
        let map = with_synonyms(&[("yalu river", "Yalu")]).unwrap();
        assert_eq!(canonicalize(" Yalu river ", &map), "Yalu");
        assert_eq!(canonicalize("YALU RIVER", &map), "Yalu");
        assert_eq!(canonicalize("Yalu", &map), "Yalu");
        assert_eq!(canonicalize("yalu", &map), "Yalu");
    }

    #[test]
    fn synonym_chains_resolve_and_cycles_fail() {
        let map = with_synonyms(&[("a", "b"), ("b", "C")]).unwrap();
        assert_eq!(canonicalize("a", &map), "C");
        assert_eq!(canonicalize("b", &map), "C");
        assert!(with_synonyms(&[("a", "b"), ("b", "a")]).is_err());
        assert!(with_synonyms(&[("x", "Foo"), ("y", "FOO")]).is_err());
    }

    #[test]
    fn map_from_json() {
        let map = CanonicalizationMap::from_json(
            r#"{"numeric_percent_to_fraction": true, "case_fold": true, "synonyms": {"fifty percent": "50%"}}"#,
        )
        .unwrap();
        assert_eq!(canonicalize("Fifty Percent", &map), "50%");
        assert_eq!(canonicalize(&canonicalize("Fifty Percent", &map), &map), "50%");
        assert!(CanonicalizationMap::from_json("{").is_err());
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(
            raw in "[ a-cA-C0-9.%+-]{0,8}",
            keys in prop::collection::vec("[a-cA-C0-9. %]{1,5}", 0..4),
            targets in prop::collection::vec("[a-cA-C0-9.%]{1,5}", 0..4),
        ) {
            let pairs: Vec<(&str, &str)> = keys.iter().zip(&targets).map(|(k, t)| (k.as_str(), t.as_str())).collect();
            if let Ok(map) = with_synonyms(&pairs) {
                let once = canonicalize(&raw, &map);
                prop_assert_eq!(canonicalize(&once, &map), once);
                for (_, t) in &pairs {
                    let c = canonicalize(t, &map);
                    prop_assert_eq!(canonicalize(&c, &map), c);
                }
            }
        }
    }

    fn circle_records() -> Vec<ResponseRecord> {
        let supports = [("1", 11), ("2", 8), ("3", 134), ("4", 16), ("6", 27), ("9", 21)];
        let mut out = Vec::new();
        for (answer, n) in supports {
            for i in 0..n {
                let preds: Vec<&str> = if answer == "3" && i < 28 { vec!["6"] } else { vec!["3"] };
                out.push(rec(answer, &preds));
            }
        }
        out
    }

    #[test]
    fn circle_supports_order() {
        let records = circle_records();
        assert_eq!(records.len(), 217);
        let m = build_matrix(&records, &CanonicalizationMap::default(), &IngestOptions::default()).unwrap();
        assert_eq!(m.answers, ["3", "6", "9", "4", "1", "2"]);
        assert_eq!(m.support, [134, 27, 21, 16, 11, 8]);
        assert_eq!(m.n_respondents, 217);
        assert!(m.counts[0][1] >= 28);
    }

    #[test]
    fn one_person_rule() {
        let opts = IngestOptions {
            threshold: 0.0,
            ..Default::default()
        };
        let map = CanonicalizationMap::default();
        assert_eq!(build_matrix(&[rec("x", &[])], &map, &opts), Err(Error::NoAnswerSurvives));
        let m = build_matrix(&[rec("x", &[]), rec("x", &[])], &map, &opts).unwrap();
        assert_eq!(m.answers, ["x"]);
        assert_eq!(m.counts, vec![vec![0]]);
        assert_eq!(m.support, [2]);
    }

    #[test]
    fn threshold_is_inclusive_drop() {
        // 100 answering respondents; "b" has exactly 3 = 3%, dropped; "c" has 4, kept.
        let mut records = Vec::new();
        records.extend((0..93).map(|_| rec("a", &["b"])));
        records.extend((0..3).map(|_| rec("b", &["a"])));
        records.extend((0..4).map(|_| rec("c", &["a", "zzz"])));
        records.extend((0..10).map(|_| rec("idk", &["a"])));
        let m = build_matrix(&records, &CanonicalizationMap::default(), &IngestOptions::default()).unwrap();
        assert_eq!(m.answers, ["a", "c"]);
        assert_eq!(m.n_respondents, 110);
        // Predictions of "b" by the 93 "a" respondents plus "zzz" by the 4 "c" ones.
        assert_eq!(m.dropped_predictions, 97);
        assert_eq!(m.counts, vec![vec![0, 0], vec![4, 0]]);
    }

    #[test]
    fn dont_know_excluded_but_counted() {
        let records = vec![rec("a", &["b"]), rec("a", &["b"]), rec("b", &["a"]), rec("b", &[]), rec(" idk ", &["a"])];
        let m = build_matrix(&records, &CanonicalizationMap::default(), &IngestOptions::default()).unwrap();
        assert_eq!(m.answers, ["a", "b"]);
        assert_eq!(m.n_respondents, 5);
        assert_eq!(m.support.iter().sum::<u64>(), 4);
        assert_eq!(m.counts, vec![vec![0, 2], vec![1, 0]]);
    }

    #[test]
    fn first_only_policy() {
        let records = vec![rec("a", &["zzz", "b", "a"]), rec("a", &[]), rec("b", &["b", "a"]), rec("b", &[])];
        let map = CanonicalizationMap::default();
        let all = build_matrix(&records, &map, &IngestOptions::default()).unwrap();
        assert_eq!(all.counts, vec![vec![1, 1], vec![1, 1]]);
        let first = build_matrix(
            &records,
            &map,
            &IngestOptions {
                prediction_policy: PredictionPolicy::FirstOnly,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(first.counts, vec![vec![0, 1], vec![0, 1]]);
        assert_eq!(first.dropped_predictions, 1);
    }

    #[test]
    fn rejects_mixed_questions_and_bad_threshold() {
        let mut other = rec("a", &[]);
        other.question_id = "q2".into();
        let err = build_matrix(&[rec("a", &[]), other], &CanonicalizationMap::default(), &IngestOptions::default());
        assert!(matches!(err, Err(Error::MixedQuestionIds { .. })));
        let opts = IngestOptions {
            threshold: 1.0,
            ..Default::default()
        };
        assert!(build_matrix(&[rec("a", &[])], &CanonicalizationMap::default(), &opts).is_err());
    }

    #[test]
    fn normalize_divides_by_total() {
        let m = AnswerPredictionMatrix {
            answers: vec!["a".into(), "b".into()],
            counts: vec![vec![3, 1], vec![0, 0]],
            support: vec![2, 2],
            n_respondents: 4,
            dropped_predictions: 0,
        };
        let j = normalize(&m).unwrap();
        assert_eq!(j.m, DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.0, 0.0]));
        let zero = AnswerPredictionMatrix {
            counts: vec![vec![0, 0], vec![0, 0]],
            ..m
        };
        assert_eq!(normalize(&zero), Err(Error::NoPredictionsRecorded));
    }

    #[test]
    fn normalize_recovers_rational_joint() {
        // 1000 * running-example joint.
        let counts = vec![vec![448, 0, 112], vec![120, 150, 30], vec![112, 0, 28]];
        let m = AnswerPredictionMatrix {
            answers: vec!["3".into(), "4".into(), "6".into()],
            counts,
            support: vec![560, 300, 140],
            n_respondents: 1000,
            dropped_predictions: 0,
        };
        let j = normalize(&m).unwrap();
        let expected = [0.448, 0.0, 0.112, 0.12, 0.15, 0.03, 0.112, 0.0, 0.028];
        for (i, e) in expected.iter().enumerate() {
            assert!((j.m[(i / 3, i % 3)] - e).abs() <= 1e-15);
        }
    }

    #[test]
    fn support_and_row_sum_frequencies_differ() {
        // "a" respondents make many predictions, "b" respondents few.
        let records = vec![rec("a", &["a", "b", "b"]), rec("a", &["b", "b"]), rec("b", &["a"]), rec("b", &[]), rec("b", &[])];
        let m = build_matrix(&records, &CanonicalizationMap::default(), &IngestOptions::default()).unwrap();
        assert_eq!(m.answers, ["b", "a"]);
        assert_eq!(m.support_frequencies(), vec![0.6, 0.4]);
        assert_eq!(m.row_sum_frequencies(), vec![1.0 / 6.0, 5.0 / 6.0]);
    }

    #[test]
    fn record_order_does_not_matter() {
        let mut records = circle_records();
        let map = CanonicalizationMap::default();
        let opts = IngestOptions::default();
        let a = build_matrix(&records, &map, &opts).unwrap();
        records.reverse();
        let b = build_matrix(&records, &map, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let records = vec![rec("a", &["b", "c"]), rec("b, with comma", &[]), rec("c", &["a"])];
        let mut buf = Vec::new();
        write_responses_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("respondent_id,question_id,answer,predictions\n"));
        assert_eq!(read_responses_csv(text.as_bytes()).unwrap(), records);

        let err = read_responses_csv("".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = read_responses_csv("a,b,c\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = read_responses_csv("respondent_id,question_id,answer,predictions\nr1,q,x,y\nr2,q,  ,y\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = read_responses_csv("respondent_id,question_id,answer,predictions\nr1,q,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn matrix_json_validation() {
        let ok = r#"{"answers":["a","b"],"counts":[[0,1],[2,0]],"support":[2,2],"n_respondents":5}"#;
        let m = AnswerPredictionMatrix::from_json(ok).unwrap();
        assert_eq!(AnswerPredictionMatrix::from_json(&m.to_json()).unwrap(), m);
        let bad = r#"{"answers":["a","b"],"counts":[[0,1]],"support":[2,2],"n_respondents":5}"#;
        assert!(matches!(AnswerPredictionMatrix::from_json(bad), Err(Error::NotSquare { .. })));
        let bad = r#"{"answers":["a","b"],"counts":[[0,1],[2,0]],"support":[2,2],"n_respondents":3}"#;
        assert!(AnswerPredictionMatrix::from_json(bad).is_err());
    }
}
