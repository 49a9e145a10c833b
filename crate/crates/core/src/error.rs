use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid UTF-8 at line {line}")]
    NonUtf8 { path: PathBuf, line: usize },

    #[error("column not found: {column}; available: {}", available.join(", "))]
    MissingColumn {
        column: String,
        available: Vec<String>,
    },

    #[error("{path}: malformed row {row}: {message}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    RatioOutOfRange(f64),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("zero-norm vector{}", token.as_ref().map(|t| format!(" for token {t:?}")).unwrap_or_default())]
    ZeroNorm { token: Option<String> },

    #[error("invalid embedding space: {0}")]
    InvalidSpace(String),

    #[error("token not in vocabulary: {0}")]
    TokenAbsent(String),

    #[error("vocabulary is empty after applying min_count = {min_count}")]
    EmptyVocabulary { min_count: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("word set {name:?}: {message}")]
    InvalidWordSet { name: String, message: String },

    #[error(
        "set {name:?} resolved to {found} < {min_size} tokens; dropped: {}",
        dropped.join(", ")
    )]
    UnderResolved {
        name: String,
        found: usize,
        min_size: usize,
        dropped: Vec<String>,
    },

    #[error("invalid WEAT input: {0}")]
    InvalidWeatInput(String),

    #[error("zero variance in associations; effect size undefined")]
    ZeroVariance,

    #[error("monte carlo mode needs at least 100 iterations, got {0}")]
    TooFewIterations(usize),

    #[error("lexicons overlap on: {}", .0.join(", "))]
    OverlappingLexicons(Vec<String>),

    #[error("gender class counts for set {0:?} have zero total")]
    ZeroTotal(String),

    #[error("TGBI needs at least one set")]
    NoSets,

    #[error("no resolvable gender pairs")]
    NoResolvablePairs,

    #[error("cannot compare domains: {0}")]
    Compare(String),

    #[error("unknown format: {0}")]
    UnknownFormat(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
