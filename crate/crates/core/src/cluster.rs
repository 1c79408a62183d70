//! The cluster backend contract shared by the simulator and any real-cluster adapter.

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::fault::FaultSpec;
use crate::probe::ProbeTarget;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClusterError {
    #[error("fault selector {0} matches no pod")]
    SelectorMatchesNothing(String),
    #[error("no registered service {namespace}/{name}")]
    UnknownService { namespace: String, name: String },
    #[error("unsupported probe target: {0}")]
    UnsupportedTarget(String),
    #[error("cluster did not settle within {0} s")]
    NotSettled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    PodKilled,
    PodRestarted,
    PodScheduled,
    FaultStarted,
    FaultEnded,
    ProbeSample,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterEvent {
    pub at_s: u64,
    pub kind: EventKind,
    pub detail: BTreeMap<String, String>,
}

/// What the experiment executor needs from a cluster.
pub trait ClusterBackend {
    fn clock_s(&self) -> u64;

    /// Advances the cluster by `dt_s` seconds, returning the events emitted.
    fn advance(&mut self, dt_s: u64) -> alloc::vec::Vec<ClusterEvent>;

    fn inject_fault(&mut self, fault: &FaultSpec, duration_s: u32) -> Result<(), ClusterError>;

    /// Takes one probe reading at the current clock.
    fn sample(&mut self, target: &ProbeTarget) -> Result<f64, ClusterError>;

    /// Events recorded so far, when the backend keeps them.
    fn event_log(&self) -> &[ClusterEvent] {
        &[]
    }
}
