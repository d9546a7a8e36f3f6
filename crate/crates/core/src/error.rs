use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lexicon group `{0}` is empty")]
    EmptyGroup(&'static str),
    #[error("lexicon group `{group}` contains `{word}` more than once")]
    DuplicateWord { group: &'static str, word: String },
    #[error("invalid word {word:?}: words must be non-empty and contain no whitespace")]
    InvalidWord { word: String },
    #[error("lexicon line {line}: {message}")]
    LexiconSyntax { line: usize, message: String },
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("instance has {found} but task `{task}` expects {expected}")]
    FormatMismatch {
        task: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("scoring backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("scoring backend rejected the request ({status}): {message}")]
    BackendRejected { status: u16, message: String },
    #[error("label word {0:?} is not a single token for the serving model")]
    MultiTokenLabelWord(String),
    #[error("backend returned a non-finite logit")]
    NonFiniteLogit,
    #[error("backend does not support {0} scoring")]
    UnsupportedStyle(&'static str),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("degenerate prior: component {index} is {value:e}")]
    DegeneratePrior { index: usize, value: f64 },

    #[error("budget {budget} exceeds the search space size {size}")]
    BudgetTooLarge { budget: usize, size: usize },
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("source task has {source_classes} classes but target task has {target_classes}")]
    ClassMismatch {
        source_classes: usize,
        target_classes: usize,
    },
    #[error("class {0} has no instances to sample from")]
    InsufficientData(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures that originate in the scoring backend rather than
    /// in local configuration or input data.
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            Error::BackendUnavailable(_)
                | Error::BackendRejected { .. }
                | Error::MultiTokenLabelWord(_)
                | Error::NonFiniteLogit
                | Error::UnsupportedStyle(_)
                | Error::MalformedResponse(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
