//! Agent roles and the persisted trace of one cycle.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModelError};
use crate::execute::{check_results, ExperimentResult};
use crate::ledger::{CostLedger, Phase, Usage};
use crate::model::{AnalysisReport, CycleOutcome, Hypothesis, ProcessedContext, ProjectInput, Reconfiguration, SourceFile};
use crate::plan::ExperimentPlan;
use crate::workflow::WorkflowManifest;

pub const SCHEMA_VERSION: u32 = 1;

/// One entry per subdivided step of the cycle. Every agent call names one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentRole {
    ContextSummarizer,
    IssueSpotter,
    AppGuesser,
    PolicyFilter,
    StateDrafter,
    ProbeWriter,
    ThresholdSetter,
    VaCBuilder,
    SufficiencyJudge,
    ScenarioDrafter,
    FaultRefiner,
    StagePlanner,
    ItemScheduler,
    TimelineWriter,
    Replanner,
    FailureAnalyst,
    Reconfigurer,
    Summarizer,
}

impl AgentRole {
    pub const ALL: [AgentRole; 18] = [
        AgentRole::ContextSummarizer,
        AgentRole::IssueSpotter,
        AgentRole::AppGuesser,
        AgentRole::PolicyFilter,
        AgentRole::StateDrafter,
        AgentRole::ProbeWriter,
        AgentRole::ThresholdSetter,
        AgentRole::VaCBuilder,
        AgentRole::SufficiencyJudge,
        AgentRole::ScenarioDrafter,
        AgentRole::FaultRefiner,
        AgentRole::StagePlanner,
        AgentRole::ItemScheduler,
        AgentRole::TimelineWriter,
        AgentRole::Replanner,
        AgentRole::FailureAnalyst,
        AgentRole::Reconfigurer,
        AgentRole::Summarizer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentRole::ContextSummarizer => "ContextSummarizer",
            AgentRole::IssueSpotter => "IssueSpotter",
            AgentRole::AppGuesser => "AppGuesser",
            AgentRole::PolicyFilter => "PolicyFilter",
            AgentRole::StateDrafter => "StateDrafter",
            AgentRole::ProbeWriter => "ProbeWriter",
            AgentRole::ThresholdSetter => "ThresholdSetter",
            AgentRole::VaCBuilder => "VaCBuilder",
            AgentRole::SufficiencyJudge => "SufficiencyJudge",
            AgentRole::ScenarioDrafter => "ScenarioDrafter",
            AgentRole::FaultRefiner => "FaultRefiner",
            AgentRole::StagePlanner => "StagePlanner",
            AgentRole::ItemScheduler => "ItemScheduler",
            AgentRole::TimelineWriter => "TimelineWriter",
            AgentRole::Replanner => "Replanner",
            AgentRole::FailureAnalyst => "FailureAnalyst",
            AgentRole::Reconfigurer => "Reconfigurer",
            AgentRole::Summarizer => "Summarizer",
        }
    }

    pub fn from_name(name: &str) -> Option<AgentRole> {
        AgentRole::ALL.into_iter().find(|r| r.name() == name)
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub role: AgentRole,
    pub phase: Phase,
    pub attempts: u32,
    pub usage: Usage,
}

/// One experiment execution and whatever analysis and improvement followed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub plan: ExperimentPlan,
    pub workflow: WorkflowManifest,
    pub result: ExperimentResult,
    #[serde(default)]
    pub report: Option<AnalysisReport>,
    #[serde(default)]
    pub reconfiguration: Option<Reconfiguration>,
    /// Manifest files in effect after this loop's reconfiguration (or unchanged).
    pub manifest_set_after: Vec<SourceFile>,
}

impl LoopRecord {
    pub fn passed(&self) -> bool {
        check_results(&self.result)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub schema_version: u32,
    pub input: ProjectInput,
    #[serde(default)]
    pub context: Option<ProcessedContext>,
    #[serde(default)]
    pub hypothesis: Option<Hypothesis>,
    pub loops: Vec<LoopRecord>,
    pub summary: String,
    pub ledger: CostLedger,
    pub outcome: CycleOutcome,
    pub calls: Vec<CallRecord>,
    /// False when the final manifest set was never confirmed by an all-pass run.
    pub final_set_validated: bool,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl CycleRecord {
    pub fn new(input: ProjectInput) -> Self {
        CycleRecord {
            schema_version: SCHEMA_VERSION,
            input,
            context: None,
            hypothesis: None,
            loops: Vec::new(),
            summary: String::new(),
            ledger: CostLedger::new(),
            outcome: CycleOutcome::Aborted { reason: String::from("not started") },
            calls: Vec::new(),
            final_set_validated: false,
            diagnostics: Vec::new(),
        }
    }

    /// Number of experiment executions.
    pub fn experiment_runs(&self) -> usize {
        self.loops.len()
    }

    pub fn reconfigurations(&self) -> usize {
        self.loops.iter().filter(|l| l.reconfiguration.is_some()).count()
    }

    /// Ledger rebuilt from the call log in call order.
    pub fn ledger_from_calls(&self) -> CostLedger {
        let mut ledger = CostLedger::new();
        for call in &self.calls {
            ledger.record(call.phase, call.usage);
        }
        ledger
    }

    /// A copy with every wall-clock field zeroed, for byte comparison of runs.
    pub fn masked(&self) -> CycleRecord {
        let mut out = self.clone();
        out.ledger = out.ledger.without_wall_time();
        for call in &mut out.calls {
            call.usage.wall_time_s = 0.0;
        }
        out
    }

    pub fn validate(&self, max_loops: u32) -> Result<(), ModelError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "cycle record",
                format!("schema version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.loops.len() > 1 + max_loops as usize {
            return Err(invalid("cycle record", format!("{} experiment runs exceed 1 + {max_loops}", self.loops.len())));
        }
        if self.ledger_from_calls() != self.ledger {
            return Err(invalid("cycle record", "ledger does not match the recorded agent usages"));
        }
        match &self.outcome {
            CycleOutcome::Aborted { .. } => {}
            CycleOutcome::SatisfiedNoChange => {
                if self.loops.len() != 1 || !self.loops[0].passed() || self.reconfigurations() != 0 {
                    return Err(invalid("cycle record", "SatisfiedNoChange requires one passing run and no reconfiguration"));
                }
            }
            CycleOutcome::SatisfiedAfterImprovement { loops } => {
                let last_ok = self.loops.last().is_some_and(LoopRecord::passed);
                if !last_ok || self.loops.len() != *loops as usize + 1 {
                    return Err(invalid("cycle record", "improvement outcome disagrees with the loop log"));
                }
            }
        }
        Ok(())
    }
}
