use std::path::PathBuf;

/// Errors produced by every fallible operation in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value encountered: {0}")]
    InvalidNumeric(String),
    #[error("shape mismatch: {0}")]
    InvalidShape(String),
    #[error("zero-norm vector: {0}")]
    ZeroVector(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cumulative probabilities are degenerate (max == min)")]
    DegenerateDetection,
    #[error("no shared classes detected")]
    NoSharedClasses,
    #[error("no usable centroids: every candidate class is empty")]
    NoUsableCentroids,
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("class {0} is already stored in the prototype bank")]
    ClassAlreadyStored(usize),
    #[error("class {0} has never been stored in the prototype bank")]
    UnknownClass(usize),
    #[error("prototype bank is empty")]
    EmptyBank,
    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("no source center for class {0}")]
    MissingCenter(usize),
    #[error("source dataset has no samples of class {0}")]
    IncompleteSource(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("step {step} out of range 1..={steps}")]
    InvalidStep { step: usize, steps: usize },
    #[error("format error at line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

/// Non-fatal conditions that a run keeps going through but reports.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Cumulative probabilities were flat; every class was treated as shared.
    DegenerateDetection,
    /// Fewer samples than the bank capacity were available for a class.
    PrototypeShortfall {
        class: usize,
        wanted: usize,
        got: usize,
    },
    /// Predicted probabilities were clamped before taking the log.
    LogClamped { count: usize },
    /// A detected class received no pseudo-labeled samples.
    EmptyPseudoClass { class: usize },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::DegenerateDetection => {
                write!(f, "degenerate cumulative probabilities; all classes treated as shared")
            }
            Warning::PrototypeShortfall { class, wanted, got } => {
                write!(f, "class {class}: wanted {wanted} prototypes, only {got} samples")
            }
            Warning::LogClamped { count } => write!(f, "{count} probabilities clamped before log"),
            Warning::EmptyPseudoClass { class } => {
                write!(f, "detected class {class} received no pseudo-labeled samples")
            }
        }
    }
}
