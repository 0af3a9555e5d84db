use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model, matrix or config field failed validation.
    #[error("invalid {field}{}: {message}", index_suffix(.index))]
    Validation {
        field: String,
        index: Option<Vec<usize>>,
        message: String,
    },

    #[error("no answer survives threshold")]
    NoAnswerSurvives,

    #[error("records span multiple questions: {first:?} and {other:?}")]
    MixedQuestionIds { first: String, other: String },

    #[error("no prediction mass")]
    NoPredictionMass,

    #[error("no predictions recorded")]
    NoPredictionsRecorded,

    #[error("answer set too large for exact search: {size} answers exceeds cap {cap} of {algorithm}")]
    TooLarge {
        algorithm: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("answer frequency must be strictly positive, got {value} for answer {index}")]
    NonPositiveFrequency { index: usize, value: f64 },

    #[error("matrix is not semi-orthogonal: {0}")]
    NotSemiOrthogonal(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{0}")]
    Io(String),
}

fn index_suffix(index: &Option<Vec<usize>>) -> String {
    match index {
        None => String::new(),
        Some(ix) => {
            let parts: Vec<String> = ix.iter().map(ToString::to_string).collect();
            format!("[{}]", parts.join("]["))
        }
    }
}

impl Error {
    pub(crate) fn validation(field: &str, index: Option<Vec<usize>>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            index,
            message: message.into(),
        }
    }

    /// True for the search-size cap errors, which callers may want to treat differently
    /// from malformed input.
    pub fn is_cap_exceeded(&self) -> bool {
        matches!(self, Error::TooLarge { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
