use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular pivot at row {row} (|pivot| = {pivot:e})")]
    SingularPivot { row: usize, pivot: f64 },

    #[error("singular reduced system in {context} (condition number {condition:e})")]
    SingularReduced {
        context: &'static str,
        condition: f64,
    },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("empty reduced basis for field {field}: no eigenvalue above the floor")]
    EmptyBasis { field: &'static str },

    #[error("form {form} does not match the supplied spaces: {reason}")]
    FormMismatch { form: &'static str, reason: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("configuration error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures that stem from user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
