//! Output types of the agent roles and their JSON schemas.

use chaos_core::plan::{ScheduledItem, Task};
use chaos_core::record::AgentRole;
use chaos_core::{FaultSpec, ProbeSpec, ReconfigOp, ResourceSummary, Threshold, VaCSpec};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::gateway::AgentOutput;

fn object(properties: Value, required: &[&str]) -> Value {
    json!({"type": "object", "properties": properties, "required": required, "additionalProperties": false})
}

fn text() -> Value {
    json!({"type": "string", "minLength": 1})
}

fn texts() -> Value {
    json!({"type": "array", "items": {"type": "string", "minLength": 1}})
}

fn seconds() -> Value {
    json!({"type": "integer", "minimum": 1})
}

fn labels() -> Value {
    json!({"type": "object", "additionalProperties": {"type": "string"}, "minProperties": 1})
}

fn probe_schema() -> Value {
    let cluster = object(
        json!({
            "tool": {"const": "cluster_api"},
            "namespace": {"type": "string"},
            "labels": labels(),
            "quantity": {"enum": ["pod_count", "ready_replica_count"]},
        }),
        &["tool", "labels", "quantity"],
    );
    let http = object(
        json!({
            "tool": {"const": "http_load"},
            "url": text(),
            "virtual_users": {"type": "integer", "minimum": 1},
            "quantity": {"enum": ["success_rate", "latency_p95_ms"]},
        }),
        &["tool", "url", "virtual_users", "quantity"],
    );
    object(
        json!({"target": {"oneOf": [cluster, http]}, "sample_interval_s": seconds(), "duration_s": seconds()}),
        &["target", "sample_interval_s", "duration_s"],
    )
}

fn threshold_schema() -> Value {
    object(
        json!({
            "comparator": {"enum": ["eq", "ge", "le", "lt", "gt"]},
            "value": {"type": "number"},
            "aggregation": {"enum": ["every_sample", "final_sample", "p95"]},
        }),
        &["comparator", "value", "aggregation"],
    )
}

fn selector_schema() -> Value {
    object(
        json!({
            "namespace": text(),
            "labels": labels(),
            "mode": {"oneOf": [
                {"enum": ["one", "all"]},
                object(json!({"fixed_count": {"type": "integer", "minimum": 1}}), &["fixed_count"]),
            ]},
        }),
        &["namespace", "labels", "mode"],
    )
}

fn fault_schema() -> Value {
    let action = |subtype: &str, params: Value, required: &[&str]| {
        let mut props = params.as_object().cloned().unwrap_or_default();
        props.insert("subtype".into(), json!({"const": subtype}));
        let mut req = vec!["subtype"];
        req.extend_from_slice(required);
        object(Value::Object(props), &req)
    };
    object(
        json!({
            "name": text(),
            "action": {"oneOf": [
                action("pod-kill", json!({"grace_period_s": {"type": "integer", "minimum": 0, "maximum": 300}}), &[]),
                action("pod-failure", json!({}), &[]),
                action("delay", json!({"latency_ms": {"type": "integer", "minimum": 1, "maximum": 60000}}), &["latency_ms"]),
                action("loss", json!({"loss_pct": {"type": "integer", "minimum": 0, "maximum": 100}}), &["loss_pct"]),
                action("cpu", json!({"workers": {"type": "integer", "minimum": 1, "maximum": 64}}), &["workers"]),
            ]},
            "selector": selector_schema(),
        }),
        &["name", "action", "selector"],
    )
}

fn vac_schema() -> Value {
    object(
        json!({
            "steady_state_name": text(),
            "probe": probe_schema(),
            "threshold": threshold_schema(),
            "script_text": {"type": ["string", "null"]},
        }),
        &["steady_state_name", "probe", "threshold"],
    )
}

fn item_schema() -> Value {
    let task = json!({"oneOf": [
        object(json!({"run_vac": object(json!({"steady_state": text()}), &["steady_state"])}), &["run_vac"]),
        object(json!({"inject_fault": object(json!({"fault": text()}), &["fault"])}), &["inject_fault"]),
    ]});
    object(
        json!({
            "stage": {"enum": ["pre", "fault", "post"]},
            "task": task,
            "start_offset_s": {"type": "integer", "minimum": 0},
            "duration_s": seconds(),
        }),
        &["stage", "task", "start_offset_s", "duration_s"],
    )
}

fn non_empty(what: &str, s: &str) -> Result<(), String> {
    if s.trim().is_empty() {
        Err(format!("`{what}` must not be empty"))
    } else {
        Ok(())
    }
}

macro_rules! agent_output {
    ($ty:ty, $role:ident, $schema:expr) => {
        impl AgentOutput for $ty {
            const ROLE: AgentRole = AgentRole::$role;
            fn schema() -> Value {
                $schema
            }
        }
    };
    ($ty:ty, $role:ident, $schema:expr, |$s:ident| $check:expr) => {
        impl AgentOutput for $ty {
            const ROLE: AgentRole = AgentRole::$role;
            fn schema() -> Value {
                $schema
            }
            fn check(&self) -> Result<(), String> {
                let $s = self;
                $check
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSummaries {
    pub summaries: Vec<ResourceSummary>,
}
agent_output!(
    ContextSummaries,
    ContextSummarizer,
    object(
        json!({"summaries": {"type": "array", "items": object(json!({"resource": text(), "summary": text()}), &["resource", "summary"])}}),
        &["summaries"]
    ),
    |s| s.summaries.iter().try_for_each(|r| non_empty("summary", &r.summary))
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssueList {
    pub issues: Vec<String>,
}
agent_output!(IssueList, IssueSpotter, object(json!({"issues": texts()}), &["issues"]));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppGuess {
    pub application: String,
}
agent_output!(AppGuess, AppGuesser, object(json!({"application": text()}), &["application"]), |s| non_empty(
    "application",
    &s.application
));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDecision {
    pub allowed: bool,
    pub reason: String,
    #[serde(default)]
    pub sanitized_instructions: String,
}
agent_output!(
    PolicyDecision,
    PolicyFilter,
    object(
        json!({"allowed": {"type": "boolean"}, "reason": text(), "sanitized_instructions": {"type": "string"}}),
        &["allowed", "reason"]
    ),
    |s| non_empty("reason", &s.reason)
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDraft {
    pub name: String,
    pub description: String,
}
agent_output!(
    StateDraft,
    StateDrafter,
    object(json!({"name": {"type": "string", "pattern": "^[a-z0-9][a-z0-9-]*$"}, "description": text()}), &["name", "description"]),
    |s| {
        non_empty("name", &s.name)?;
        if s.name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-') {
            Ok(())
        } else {
            Err(format!("name `{}` must be kebab-case", s.name))
        }
    }
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeDraft {
    pub probe: ProbeSpec,
}
agent_output!(ProbeDraft, ProbeWriter, object(json!({"probe": probe_schema()}), &["probe"]), |s| s
    .probe
    .validate()
    .map_err(|e| e.to_string()));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdDraft {
    pub threshold: Threshold,
}
agent_output!(ThresholdDraft, ThresholdSetter, object(json!({"threshold": threshold_schema()}), &["threshold"]));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VacScript {
    pub script: String,
}
agent_output!(VacScript, VaCBuilder, object(json!({"script": text()}), &["script"]), |s| non_empty("script", &s.script));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sufficiency {
    pub enough: bool,
    pub reason: String,
}
agent_output!(Sufficiency, SufficiencyJudge, object(json!({"enough": {"type": "boolean"}, "reason": text()}), &["enough", "reason"]));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSketch {
    pub name: String,
    pub subtype: String,
    /// Free-text description of what the fault should hit.
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDraft {
    pub narrative: String,
    pub faults: Vec<FaultSketch>,
}
agent_output!(
    ScenarioDraft,
    ScenarioDrafter,
    object(
        json!({
            "narrative": text(),
            "faults": {"type": "array", "minItems": 1, "items": object(
                json!({"name": text(), "subtype": {"enum": ["pod-kill", "pod-failure", "delay", "loss", "cpu"]}, "target": text()}),
                &["name", "subtype", "target"],
            )},
        }),
        &["narrative", "faults"]
    ),
    |s| {
        non_empty("narrative", &s.narrative)?;
        if s.faults.is_empty() {
            return Err("a scenario needs at least one fault".into());
        }
        Ok(())
    }
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultDraft {
    pub fault: FaultSpec,
}
agent_output!(FaultDraft, FaultRefiner, object(json!({"fault": fault_schema()}), &["fault"]), |s| s
    .fault
    .validate()
    .map_err(|e| e.to_string()));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageDraft {
    pub pre_s: u32,
    pub fault_s: u32,
    pub post_s: u32,
}
agent_output!(
    StageDraft,
    StagePlanner,
    object(json!({"pre_s": seconds(), "fault_s": seconds(), "post_s": seconds()}), &["pre_s", "fault_s", "post_s"]),
    |s| {
        if s.pre_s == 0 || s.fault_s == 0 || s.post_s == 0 {
            Err("every stage duration must be at least 1 s".into())
        } else {
            Ok(())
        }
    }
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemsDraft {
    pub items: Vec<ScheduledItem>,
}
agent_output!(ItemsDraft, ItemScheduler, object(json!({"items": {"type": "array", "items": item_schema()}}), &["items"]), |s| {
    s.items.iter().try_for_each(|i| match &i.task {
        Task::RunVac { steady_state: n } | Task::InjectFault { fault: n } => non_empty("task reference", n),
    })
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineDraft {
    pub summary: String,
}
agent_output!(TimelineDraft, TimelineWriter, object(json!({"summary": text()}), &["summary"]), |s| non_empty("summary", &s.summary));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplanDraft {
    pub vacs: Vec<VaCSpec>,
    pub faults: Vec<FaultSpec>,
}
agent_output!(
    ReplanDraft,
    Replanner,
    object(
        json!({"vacs": {"type": "array", "items": vac_schema()}, "faults": {"type": "array", "items": fault_schema()}}),
        &["vacs", "faults"]
    )
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisDraft {
    pub failed_items: Vec<String>,
    pub causes: Vec<String>,
    pub countermeasures: Vec<String>,
}
agent_output!(
    AnalysisDraft,
    FailureAnalyst,
    object(
        json!({"failed_items": texts(), "causes": texts(), "countermeasures": texts()}),
        &["failed_items", "causes", "countermeasures"]
    )
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconfigDraft {
    pub ops: Vec<ReconfigOp>,
    pub rationale: String,
}
agent_output!(
    ReconfigDraft,
    Reconfigurer,
    object(
        json!({
            "ops": {"type": "array", "items": {"oneOf": [
                object(json!({"op": {"const": "replace"}, "path": text(), "text": text()}), &["op", "path", "text"]),
                object(json!({"op": {"const": "create"}, "path": text(), "text": text()}), &["op", "path", "text"]),
                object(json!({"op": {"const": "delete"}, "path": text()}), &["op", "path"]),
            ]}},
            "rationale": text(),
        }),
        &["ops", "rationale"]
    )
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryDraft {
    pub summary: String,
}
agent_output!(SummaryDraft, Summarizer, object(json!({"summary": text()}), &["summary"]), |s| non_empty("summary", &s.summary));

/// Schema for one role's output.
pub fn schema_for(role: AgentRole) -> Value {
    match role {
        AgentRole::ContextSummarizer => ContextSummaries::schema(),
        AgentRole::IssueSpotter => IssueList::schema(),
        AgentRole::AppGuesser => AppGuess::schema(),
        AgentRole::PolicyFilter => PolicyDecision::schema(),
        AgentRole::StateDrafter => StateDraft::schema(),
        AgentRole::ProbeWriter => ProbeDraft::schema(),
        AgentRole::ThresholdSetter => ThresholdDraft::schema(),
        AgentRole::VaCBuilder => VacScript::schema(),
        AgentRole::SufficiencyJudge => Sufficiency::schema(),
        AgentRole::ScenarioDrafter => ScenarioDraft::schema(),
        AgentRole::FaultRefiner => FaultDraft::schema(),
        AgentRole::StagePlanner => StageDraft::schema(),
        AgentRole::ItemScheduler => ItemsDraft::schema(),
        AgentRole::TimelineWriter => TimelineDraft::schema(),
        AgentRole::Replanner => ReplanDraft::schema(),
        AgentRole::FailureAnalyst => AnalysisDraft::schema(),
        AgentRole::Reconfigurer => ReconfigDraft::schema(),
        AgentRole::Summarizer => SummaryDraft::schema(),
    }
}
