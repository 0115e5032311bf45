//! Error type shared by the whole toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("lexicon closure violation: term \"{term}\" has counterpart \"{counterpart}\" which is not in the lexicon")]
    ClosureViolation { term: String, counterpart: String },

    #[error("duplicate lexicon surface \"{surface}\"")]
    DuplicateSurface { surface: String },

    #[error("duplicate letter id \"{id}\"")]
    DuplicateId { id: String },

    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("class \"{label}\" has {count} letters; at least {required} required")]
    ClassTooSmall {
        label: String,
        count: usize,
        required: usize,
    },

    #[error("training set contains a single class")]
    SingleClass,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("vocabulary is empty after applying min_count={min_count}")]
    EmptyVocabulary { min_count: u32 },

    #[error("instance has {n} features, above the exact enumeration cap of {cap}; use the permutation estimator")]
    TooManyFeatures { n: usize, cap: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 1,
            Error::Internal(_) => 3,
            _ => 2,
        }
    }
}
