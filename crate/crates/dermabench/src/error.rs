//! Error types shared across the harness.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Dataset root is missing one of the required class subdirectories.
    #[error("dataset root {root} is missing the `{class}` subdirectory")]
    MissingClassDir { class: String, root: PathBuf },

    /// A class directory exists but contributed zero usable images.
    #[error("class `{class}` contains no decodable images")]
    EmptyClass { class: String },

    /// An image could not be decoded.
    #[error("cannot decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    /// Invalid configuration value (train fraction, batch size, zoom range...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Operation expected a split (or unsplit) manifest and got the opposite.
    #[error("manifest state error: {0}")]
    ManifestState(String),

    /// Pretrained weights for a backbone were not found and no fallback was allowed.
    #[error("pretrained weights for backbone `{backbone}` not found (looked in {searched}); \
             provide a weight cache or allow seeded initialization")]
    WeightsUnavailable { backbone: String, searched: String },

    /// Unknown backbone name in a config or on the command line.
    #[error("unknown backbone `{name}`; valid names: resnet101, densenet169, efficientnet, inceptionv3")]
    UnknownBackbone { name: String },

    /// Checkpoint written by an incompatible format version.
    #[error("checkpoint format version {found} is incompatible (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    /// Checkpoint file is truncated or internally inconsistent.
    #[error("checkpoint integrity error: {0}")]
    CheckpointIntegrity(String),

    /// Checkpoint belongs to a different backbone than requested.
    #[error("checkpoint backbone mismatch: {0}")]
    CheckpointMismatch(String),

    /// Training produced a non-finite loss.
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    /// Evaluation over an empty stream.
    #[error("cannot evaluate an empty stream")]
    EmptyEvaluation,

    /// A metric's denominator is zero; the value is undefined, never silently 0.
    #[error("metric `{metric}` is undefined: {reason}")]
    UndefinedMetric { metric: &'static str, reason: String },

    /// Class index outside {0, 1}.
    #[error("class index {index} outside {{0, 1}}")]
    ClassIndex { index: usize },

    /// Rendering was asked to plot nothing.
    #[error("cannot render: {0}")]
    EmptyRender(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config file error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code under the CLI contract: 2 for usage/config errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::UnknownBackbone { .. }
            | Error::Toml(_)
            | Error::MissingClassDir { .. }
            | Error::ManifestState(_) => 2,
            _ => 1,
        }
    }
}
