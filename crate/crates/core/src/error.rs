use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration key violates its constraint.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("empty result: {0}")]
    Empty(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("correlation undefined: both signals are constant")]
    UndefinedCorrelation,

    #[error("feature `{feature}` undefined: {reason}")]
    UndefinedFeature { feature: &'static str, reason: String },

    #[error("score undefined: {0}")]
    UndefinedScore(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }
}

/// Output of a step that may record non-fatal conditions.
#[derive(Debug, Clone)]
pub struct Noted<T> {
    pub value: T,
    pub notes: Vec<String>,
}

/// Tags an error with the pipeline stage that produced it.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
