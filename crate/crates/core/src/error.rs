use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty alignment")]
    EmptyAlignment,

    #[error("senone {0} is not in the inventory")]
    UnknownSenone(u32),

    #[error("unseen history {0}")]
    UnseenHistory(String),

    #[error("no transition statistics for senone {0}")]
    NoTransitionStats(u32),

    #[error("dangling histories in language model: {}", .0.join(", "))]
    DanglingHistories(Vec<String>),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("senone label {label} out of range for {columns} score columns")]
    LabelOutOfRange { label: u32, columns: usize },

    #[error("no complete path of {frames} frames through the graph")]
    NoPath { frames: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing LM stream '{stream}' for utterance {utt_id} hypothesis {hyp}")]
    MissingStream {
        stream: String,
        utt_id: String,
        hyp: usize,
    },

    #[error("missing utterance {0}")]
    MissingUtterance(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error("worker replicas differ after step {step}")]
    ReplicaMismatch { step: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Tags an error with the pipeline stage it came from.
    pub fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
