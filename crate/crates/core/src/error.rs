use std::path::PathBuf;

use crate::bayesnet::NodeId;
use crate::scenario::VerificationState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),

    #[error("malformed parent assignment for `{node}`: {message}")]
    MalformedAssignment { node: NodeId, message: String },

    #[error("evidence has zero probability under the joint distribution")]
    ImpossibleEvidence,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown activity `{0}`")]
    UnknownActivity(NodeId),

    #[error("activity `{0}` has already been verified")]
    AlreadyVerified(NodeId),

    #[error("activity `{0}` is not in failed status")]
    NotFailed(NodeId),

    #[error("verification horizon reached at t={0}")]
    HorizonReached(usize),

    #[error("unknown rework rule `{0}`")]
    UnknownRule(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("optimizer failed at state {state}: {source}")]
    OptimizerFailed {
        state: VerificationState,
        #[source]
        source: Box<Error>,
    },

    #[error("hindsight tree has no entry for state {0}")]
    UnresolvedState(VerificationState),

    #[error("acceptance logging was disabled for this run")]
    LoggingDisabled,

    #[error("run cancelled")]
    Cancelled,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
