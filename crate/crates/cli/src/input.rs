use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use hierarchy_core::ingest::read_responses_csv;
use hierarchy_core::{build_matrix, AnswerPredictionMatrix, Error, ResponseRecord, RunConfig};
use serde::Deserialize;

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    /// Like `From<Error>` but prefixes the file the error came from.
    pub fn at(path: &Path, e: Error) -> Self {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_cap_exceeded() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Auto,
    Csv,
    Json,
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn detect(path: &Path, text: &str) -> Format {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("json") => Format::Json,
        Some("csv") => Format::Csv,
        _ if text.trim_start().starts_with('{') => Format::Json,
        _ => Format::Csv,
    }
}

fn select_question(records: Vec<ResponseRecord>, question: Option<&str>) -> Vec<ResponseRecord> {
    match question {
        Some(q) => records.into_iter().filter(|r| r.question_id == q).collect(),
        None => records,
    }
}

/// Loads a responses CSV or an answer-prediction matrix JSON and returns the matrix.
/// Thresholding applies to CSV input only; a matrix file is taken as already tabulated.
pub fn load_matrix(
    path: &Path,
    format: Format,
    question: Option<&str>,
    config: &RunConfig,
) -> Result<AnswerPredictionMatrix, Failure> {
    let text = read_text(path)?;
    if text.trim().is_empty() {
        return Err(Failure::input(format!("{}: parse error at line 1: empty input", path.display())));
    }
    let format = match format {
        Format::Auto => detect(path, &text),
        f => f,
    };
    match format {
        Format::Json => AnswerPredictionMatrix::from_json(&text).map_err(|e| Failure::at(path, e)),
        _ => {
            let records = read_responses_csv(text.as_bytes()).map_err(|e| Failure::at(path, e))?;
            let records = select_question(records, question);
            build_matrix(&records, &config.canonicalization, &config.ingest_options()).map_err(|e| Failure::at(path, e))
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub questions: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    /// Responses CSV, relative to the manifest's directory.
    pub responses: PathBuf,
    #[serde(default)]
    pub truth: Option<String>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest, Failure> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::input(format!("{}: parse error at line {}: {e}", path.display(), e.line()))
    })
}

pub fn read_responses(path: &Path) -> Result<Vec<ResponseRecord>, Failure> {
    let text = read_text(path)?;
    read_responses_csv(text.as_bytes()).map_err(|e| Failure::at(path, e))
}
