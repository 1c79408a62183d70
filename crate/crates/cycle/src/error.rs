use chaos_core::{ClusterError, ExecuteError, ModelError};

use crate::gateway::GatewayError;

/// Errors from the cycle phases. Every variant aborts the cycle.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhaseError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("steady-state name `{0}` collides with an existing state")]
    DuplicateStateExhausted(String),
    #[error("no threshold consistent with the baseline: {0}")]
    ThresholdInconsistent(String),
    #[error("fault selector does not resolve: {0}")]
    SelectorUnresolvableExhausted(String),
    #[error("probe does not fit the deployed system: {0}")]
    ProbeInvalidExhausted(String),
    #[error("no valid experiment plan: {0}")]
    PlanInvalidExhausted(String),
    #[error("replanning changed the plan's intent: {0}")]
    IntentChanged(String),
    #[error("no valid reconfiguration: {0}")]
    ReconfigInvalidExhausted(String),
    #[error("reconfiguration repeats history entry {0}")]
    RepeatedReconfiguration(usize),
    #[error("failure analysis incomplete: {0}")]
    AnalysisIncompleteExhausted(String),
    #[error("summary incomplete: {0}")]
    SummaryIncompleteExhausted(String),
    #[error("deploy failed: {0}")]
    DeployFailed(ClusterError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Execute(#[from] ExecuteError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
