use alloc::string::String;

/// Errors raised by the analysis core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("corpus contains no posts")]
    EmptyCorpus,
    #[error("bucket {0} contains no posts")]
    EmptyBucket(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("unknown word: {0}")]
    UnknownWord(String),
    #[error("series too short: need at least {needed} points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("pearson correlation undefined: zero variance")]
    ZeroVariance,
    #[error("not enough words for the task: need {needed}, got {got}")]
    NotEnoughWords { needed: usize, got: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("topic inventory {0} is empty")]
    EmptyTopic(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
