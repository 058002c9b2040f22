//! Crate-wide error type.

use crate::windowing::DataParams;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: expected {expected} columns, found {found}")]
    RowWidth {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: cannot parse `{token}` as a number")]
    NumberParse { line: usize, token: String },

    #[error("line {line}: `{token}` is not a positive integer")]
    IndexParse { line: usize, token: String },

    #[error(
        "engine {engine}: cycles must be consecutive from 1, found {found} at position {position}"
    )]
    CycleSequence {
        engine: u32,
        found: u32,
        position: usize,
    },

    #[error("trajectory set is empty")]
    EmptySet,

    #[error("expected a {expected} set, got a {got} set")]
    WrongKind {
        expected: &'static str,
        got: &'static str,
    },

    #[error("test set has {engines} engines but the RUL file has {entries} entries")]
    RulCountMismatch { engines: usize, entries: usize },

    #[error("test set has no true RUL values attached")]
    MissingTrueRul,

    #[error("unknown subset `{0}` (expected FD001..FD004)")]
    UnknownSubset(String),

    #[error("cycle {cycle} is outside 1..={failure_cycle}")]
    CycleOutOfRange { cycle: u32, failure_cycle: u32 },

    #[error("invalid data parameters: {0}")]
    InvalidParams(String),

    #[error("window width {expected} does not match feature length {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("metric input is empty")]
    EmptyMetricInput,

    #[error("health score overflows at entry {index} (error {value})")]
    ScoreOverflow { index: usize, value: f64 },

    #[error("invalid layer specification: {0}")]
    InvalidLayer(String),

    #[error("unknown architecture preset {0} (expected 1..=6)")]
    UnknownArchitecture(u8),

    #[error("invalid training configuration: {0}")]
    InvalidTrainConfig(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("candidate {candidate} lies outside the search bounds")]
    OutOfBounds { candidate: DataParams },

    #[error("invalid optimizer configuration: {0}")]
    InvalidDeConfig(String),

    #[error("search grid is empty")]
    EmptyGrid,

    #[error("no grid point evaluated successfully")]
    AllPointsFailed,

    #[error("config file line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("invalid experiment configuration: {0}")]
    InvalidExperiment(String),

    #[error("{stage} stage failed")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the name of the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
