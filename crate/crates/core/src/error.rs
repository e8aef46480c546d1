use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("letter {letter} is outside the alphabet 1..={alphabet_size}")]
    InvalidLetter { letter: usize, alphabet_size: usize },

    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("the empty word has no last letter")]
    EmptyWord,

    #[error("cannot parse word `{0}`")]
    WordSyntax(String),

    #[error("word {word} is out of range for a signature of dimension {dimension} truncated at level {level}")]
    WordOutOfRange {
        word: String,
        dimension: usize,
        level: usize,
    },

    #[error("signature shape mismatch: dimension {0} vs {1}, level {2} vs {3}")]
    ShapeMismatch(usize, usize, usize, usize),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("polynomial variable lists differ: [{0}] vs [{1}]")]
    VariableMismatch(String, String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("no value assigned to variable `{0}`")]
    MissingAssignment(String),

    #[error("polynomial syntax error at column {column}: {message}")]
    PolySyntax { column: usize, message: String },

    #[error("expected signature has no entry for {word} (truncation level {level}); increase its depth or lower r / |tau|")]
    TruncationTooShallow { word: String, level: usize },

    #[error("invalid vector field: {0}")]
    InvalidVectorField(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("scheme {scheme} cannot integrate a {driver} driver")]
    SchemeDriverMismatch { scheme: String, driver: String },

    #[error("neither circulant embedding nor Cholesky factorisation is valid for this fBM covariance")]
    CovarianceNotPositive,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("need at least two samples for a covariance, got {0}")]
    TooFewSamples(usize),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
