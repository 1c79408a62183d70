use alloc::string::String;

/// Violations of domain-type invariants.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("malformed document in {path} (document {index}): {reason}")]
    MalformedDocument {
        path: String,
        index: usize,
        reason: String,
    },
    #[error("deploy config references {0}, which is not among the manifests")]
    MissingReference(String),
    #[error("duplicate resource id {0}")]
    DuplicateResourceId(String),
    #[error("duplicate manifest path {0}")]
    DuplicatePath(String),
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
}

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        what,
        reason: reason.into(),
    }
}
