//! Domain model, simulator, planner, and executor for LLM-driven chaos-engineering cycles.
//!
//! Everything here is `no_std` + `alloc`; file formats, the LLM gateway, and the
//! CLI live in the `chaos-cycle` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cluster;
pub mod doc;
pub mod error;
pub mod execute;
pub mod fault;
pub mod ledger;
pub mod manifest;
pub mod model;
pub mod plan;
pub mod probe;
pub mod record;
pub mod sim;
pub mod workflow;

pub use cluster::{ClusterBackend, ClusterError, ClusterEvent, EventKind};
pub use doc::{diff_nodes, FieldChange, Node};
pub use error::ModelError;
pub use execute::{check_results, execute_workflow, run_probe, ExecuteError, ExperimentResult, ItemOutcome};
pub use fault::{FailureScenario, FaultAction, FaultKind, FaultSelector, FaultSpec, SelectorMode};
pub use ledger::{CostLedger, Phase, Usage};
pub use manifest::{diff_manifest_sets, ChangeSet, FileChange, LabelSelector, ManifestFile, ManifestSet, Resource, ResourceId, RestartPolicy, Workload};
pub use model::{
    AnalysisReport, CycleOutcome, Hypothesis, ProcessedContext, ProjectInput, ReconfigOp, Reconfiguration, ResourceSummary, SourceFile, SteadyState,
    VaCSpec,
};
pub use plan::{intent_changes, ExperimentPlan, PlanError, ScheduledItem, Stage, StageDurations, Task};
pub use probe::{Aggregation, ClusterQuantity, Comparator, HttpQuantity, Measurement, ProbeSpec, ProbeTarget, Quantity, Sample, Threshold};
pub use record::{AgentRole, CallRecord, CycleRecord, LoopRecord, SCHEMA_VERSION};
pub use sim::{SimCluster, SimConfig};
pub use workflow::{compile_workflow, WorkflowManifest, WorkflowNode, WorkflowUnsound};
