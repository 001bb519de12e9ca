//! Error type shared by every stage of the pipeline.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    /// `row` is the 1-based line number in the source file (header = line 1).
    #[error("data error in {path} at row {row}: {message}")]
    Data {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("label file does not cover series: {}", .missing.join(", "))]
    LabelCoverage { missing: Vec<String> },

    #[error("label file names unknown series: {}", .unknown.join(", "))]
    UnknownLabelIds { unknown: Vec<String> },

    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("series {id} cannot be classified: {reason}")]
    Unclassifiable { id: String, reason: String },

    #[error("column {column} has zero variance")]
    ZeroVariance { column: String },

    #[error("target has no prediction differences among neighbours")]
    ConstantTarget,

    #[error("matrix rank {rank} is below the {requested} requested components")]
    RankDeficient { rank: usize, requested: usize },

    #[error("perplexity search did not converge for row {row}")]
    PerplexityNotConverged { row: usize },

    #[error("t-SNE diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("stage `{stage}` failed: {message}")]
    Pipeline { stage: String, message: String },

    /// A stage's error, labelled with the stage that raised it.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing upstream artifact {}: {hint}", .path.display())]
    MissingArtifact { path: PathBuf, hint: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Labels `self` with `stage` unless it already carries a stage.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// Name of the stage an error is attributed to, if any.
    pub fn stage(&self) -> Option<&str> {
        match self {
            Error::Stage { stage, .. } | Error::Pipeline { stage, .. } => Some(stage),
            _ => None,
        }
    }

    pub(crate) fn pipeline(stage: &str, message: impl Into<String>) -> Self {
        Error::Pipeline {
            stage: stage.to_string(),
            message: message.into(),
        }
    }
}
