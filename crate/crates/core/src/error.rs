use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} (row {row}, column `{column}`): {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing required column `{column}` in {path}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("duplicate timestamp {timestamp} at row {row} in {path}")]
    DuplicateTimestamp {
        path: PathBuf,
        row: usize,
        timestamp: String,
    },

    #[error("column `{0}` has no observed values to interpolate from")]
    UnrecoverableColumn(String),

    #[error("outage events outside the table time range: {0:?}")]
    EventsOutOfRange(Vec<String>),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dataset has a single class; both outage and non-outage rows are required")]
    SingleClass,

    #[error("SMOTE needs at least two minority rows, found {0}")]
    CannotSynthesize(usize),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid variable set: {0}")]
    InvalidVariables(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("state {state} out of range for node `{node}` with {cardinality} states")]
    StateOutOfRange {
        node: String,
        state: usize,
        cardinality: usize,
    },

    #[error("enumeration needs {required} joint states, above the cap of {cap}")]
    StateSpaceTooLarge { required: u128, cap: u128 },

    #[error("graph inconsistency: {0}")]
    Graph(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error("{step}: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tags an error with the pipeline step that produced it.
    pub fn in_step(self, step: &'static str) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}

pub(crate) trait StepExt<T> {
    fn step(self, step: &'static str) -> Result<T>;
}

impl<T> StepExt<T> for Result<T> {
    fn step(self, step: &'static str) -> Result<T> {
        self.map_err(|e| e.in_step(step))
    }
}
