use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: {left} vs {right}")]
    Shape {
        context: String,
        left: String,
        right: String,
    },

    #[error("non-finite value at row {row}, col {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("label {label} out of range for {bound} classes at position {position}")]
    LabelOutOfRange {
        label: usize,
        bound: usize,
        position: usize,
    },

    #[error("dataset validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("linear solve failed: {context} (condition estimate {cond:.3e})")]
    Singular { context: String, cond: f64 },

    #[error("solver failure at iteration {iter}: {message}")]
    Solver { iter: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn shape(context: impl Into<String>, left: impl Into<String>, right: impl Into<String>) -> Self {
        Error::Shape {
            context: context.into(),
            left: left.into(),
            right: right.into(),
        }
    }
}
