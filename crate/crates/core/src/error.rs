use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate paper id {id:?} (lines {first_line} and {line})")]
    DuplicateId { id: String, first_line: usize, line: usize },

    #[error("taxonomy contains a parent cycle through {0:?}")]
    TaxonomyCycle(Vec<String>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("training pool is empty after splitting off test and validation papers")]
    EmptyTrainPool,

    #[error("vocabulary is empty after dropping features seen in fewer than {min_df} papers")]
    EmptyVocabulary { min_df: u32 },

    #[error("feature {0} is not indexed")]
    UnindexedFeature(usize),

    #[error("label {0:?} has no training papers")]
    LabelWithoutPoints(String),

    #[error("label {0:?} has no layer in the taxonomy")]
    UnknownLayer(String),

    #[error("gold label set is empty")]
    EmptyGold,

    #[error("cannot aggregate an empty list of values")]
    EmptyAggregate,

    #[error("relative change undefined for a zero baseline")]
    ZeroBaseline,

    #[error("report for combination {combo:?} is missing metric {metric:?}")]
    MissingMetric { combo: String, metric: String },

    #[error("model file has wrong magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported model format version {found} (this build reads version {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("model file stores {found}-byte scalars, requested {expected}-byte scalars")]
    ScalarWidthMismatch { expected: usize, found: usize },

    #[error("model checksum mismatch: stored {stored}, computed {computed}")]
    Checksum { stored: String, computed: String },

    #[error("model file is truncated or corrupt: {0}")]
    Corrupt(String),

    #[error("feature index mismatch: model has {expected}, found {found}")]
    FeatureIndexMismatch { expected: String, found: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
