//! Three-stage chaos experiment plans and their validation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::fault::FaultSpec;
use crate::manifest::ManifestSet;
use crate::model::{Hypothesis, VaCSpec};
use crate::probe::ProbeTarget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pre,
    Fault,
    Post,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Pre, Stage::Fault, Stage::Post];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Pre => "pre",
            Stage::Fault => "fault",
            Stage::Post => "post",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    RunVac { steady_state: String },
    InjectFault { fault: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScheduledItem {
    pub stage: Stage,
    pub task: Task,
    pub start_offset_s: u32,
    pub duration_s: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageDurations {
    pub pre_s: u32,
    pub fault_s: u32,
    pub post_s: u32,
}

impl StageDurations {
    pub fn of(&self, stage: Stage) -> u32 {
        match stage {
            Stage::Pre => self.pre_s,
            Stage::Fault => self.fault_s,
            Stage::Post => self.post_s,
        }
    }

    pub fn total(&self) -> u64 {
        u64::from(self.pre_s) + u64::from(self.fault_s) + u64::from(self.post_s)
    }

    pub fn validate(&self, max_total_s: Option<u32>) -> Result<(), PlanError> {
        if self.pre_s == 0 || self.fault_s == 0 || self.post_s == 0 {
            return Err(PlanError::new("every stage duration must be positive"));
        }
        if let Some(max) = max_total_s {
            if self.total() > u64::from(max) {
                return Err(PlanError::new(format!(
                    "stages total {} s, exceeding the {max} s limit",
                    self.total()
                )));
            }
        }
        Ok(())
    }
}

/// A schedule of VaC runs and fault injections. The plan carries the concrete
/// VaC and fault specs it schedules, so compiling or replanning needs nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub stage_durations: StageDurations,
    pub items: Vec<ScheduledItem>,
    pub timeline_summary: String,
    pub vacs: Vec<VaCSpec>,
    pub faults: Vec<FaultSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid experiment plan: {0}")]
pub struct PlanError(pub String);

impl PlanError {
    fn new(reason: impl Into<String>) -> Self {
        PlanError(reason.into())
    }
}

impl ExperimentPlan {
    /// Checks every plan invariant, and the total-duration limit when given.
    pub fn validate(&self, max_total_s: Option<u32>) -> Result<(), PlanError> {
        self.stage_durations.validate(max_total_s)?;
        let mut vac_names = BTreeMap::new();
        for vac in &self.vacs {
            if vac_names.insert(vac.steady_state_name.as_str(), (0usize, 0usize)).is_some() {
                return Err(PlanError::new(format!("duplicate VaC `{}`", vac.steady_state_name)));
            }
        }
        let mut fault_uses = BTreeMap::new();
        for fault in &self.faults {
            if fault_uses.insert(fault.name.as_str(), 0usize).is_some() {
                return Err(PlanError::new(format!("duplicate fault `{}`", fault.name)));
            }
        }
        for (i, item) in self.items.iter().enumerate() {
            if item.duration_s == 0 {
                return Err(PlanError::new(format!("item {i} has zero duration")));
            }
            let stage_len = self.stage_durations.of(item.stage);
            if u64::from(item.start_offset_s) + u64::from(item.duration_s) > u64::from(stage_len) {
                return Err(PlanError::new(format!(
                    "item {i} ends at {} s, past the {stage_len} s {} stage",
                    item.start_offset_s + item.duration_s,
                    item.stage
                )));
            }
            match &item.task {
                Task::RunVac { steady_state } => {
                    let counts = vac_names
                        .get_mut(steady_state.as_str())
                        .ok_or_else(|| PlanError::new(format!("item {i} runs unknown VaC `{steady_state}`")))?;
                    match item.stage {
                        Stage::Pre => counts.0 += 1,
                        Stage::Post => counts.1 += 1,
                        Stage::Fault => {}
                    }
                }
                Task::InjectFault { fault } => {
                    if item.stage != Stage::Fault {
                        return Err(PlanError::new(format!(
                            "fault `{fault}` scheduled in the {} stage",
                            item.stage
                        )));
                    }
                    *fault_uses
                        .get_mut(fault.as_str())
                        .ok_or_else(|| PlanError::new(format!("item {i} injects unknown fault `{fault}`")))? += 1;
                }
            }
        }
        for (name, (pre, post)) in vac_names {
            if pre == 0 || post == 0 {
                return Err(PlanError::new(format!(
                    "steady state `{name}` needs a VaC run in both the pre and post stages"
                )));
            }
        }
        for (name, uses) in fault_uses {
            if uses != 1 {
                return Err(PlanError::new(format!("fault `{name}` must appear exactly once, found {uses}")));
            }
        }
        if self.timeline_summary.trim().is_empty() {
            return Err(PlanError::new("timeline summary is empty"));
        }
        Ok(())
    }

    /// Checks that the plan schedules exactly the hypothesis's VaCs and faults.
    pub fn validate_against(&self, hypothesis: &Hypothesis, max_total_s: Option<u32>) -> Result<(), PlanError> {
        self.validate(max_total_s)?;
        let mut vacs: Vec<&str> = self.vacs.iter().map(|v| v.steady_state_name.as_str()).collect();
        let mut states: Vec<&str> = hypothesis.steady_states.iter().map(|s| s.name.as_str()).collect();
        vacs.sort_unstable();
        states.sort_unstable();
        if vacs != states {
            return Err(PlanError::new(format!("plan VaCs {vacs:?} differ from steady states {states:?}")));
        }
        let mut faults: Vec<&str> = self.faults.iter().map(|f| f.name.as_str()).collect();
        let mut scenario: Vec<&str> = hypothesis.scenario.faults.iter().map(|f| f.name.as_str()).collect();
        faults.sort_unstable();
        scenario.sort_unstable();
        if faults != scenario {
            return Err(PlanError::new(format!("plan faults {faults:?} differ from scenario {scenario:?}")));
        }
        Ok(())
    }

    /// Checks that every probe target and fault selector resolves against `set`.
    pub fn validate_targets(&self, set: &ManifestSet) -> Result<(), PlanError> {
        for vac in &self.vacs {
            check_probe_target(&vac.probe.target, set)
                .map_err(|e| PlanError::new(format!("VaC `{}`: {e}", vac.steady_state_name)))?;
        }
        for fault in &self.faults {
            fault
                .validate_against(set)
                .map_err(|e| PlanError::new(format!("{e}")))?;
        }
        Ok(())
    }

    pub fn vac(&self, name: &str) -> Option<&VaCSpec> {
        self.vacs.iter().find(|v| v.steady_state_name == name)
    }

    pub fn fault(&self, name: &str) -> Option<&FaultSpec> {
        self.faults.iter().find(|f| f.name == name)
    }

    /// Items of one stage, in plan order.
    pub fn stage_items(&self, stage: Stage) -> impl Iterator<Item = &ScheduledItem> {
        self.items.iter().filter(move |i| i.stage == stage)
    }
}

/// Checks that a probe target names something present in `set`.
pub fn check_probe_target(target: &ProbeTarget, set: &ManifestSet) -> Result<(), String> {
    match target {
        ProbeTarget::ClusterApi { .. } => {
            let selector = target.selector().expect("cluster probes carry a selector");
            if set.workloads_matching(&selector).next().is_none() {
                return Err(format!("selector {selector} matches no workload"));
            }
        }
        ProbeTarget::HttpLoad { url, .. } => {
            let (ns, name) = crate::probe::parse_service_url(url).ok_or_else(|| format!("unsupported URL `{url}`"))?;
            if set.service(&ns, &name).is_none() {
                return Err(format!("URL `{url}` names no Service {ns}/{name}"));
            }
        }
    }
    Ok(())
}

/// Differences between two plans other than probe targets and fault label
/// scopes. Empty means the second plan keeps the first plan's intent.
pub fn intent_changes(original: &ExperimentPlan, updated: &ExperimentPlan) -> Vec<String> {
    let mut out = Vec::new();
    if original.stage_durations != updated.stage_durations {
        out.push(String::from("stage durations changed"));
    }
    if original.items != updated.items {
        out.push(String::from("scheduled items changed"));
    }
    if original.timeline_summary != updated.timeline_summary {
        out.push(String::from("timeline summary changed"));
    }
    if original.vacs.len() != updated.vacs.len() {
        out.push(String::from("number of VaCs changed"));
    }
    for (a, b) in original.vacs.iter().zip(&updated.vacs) {
        if a.steady_state_name != b.steady_state_name {
            out.push(format!("VaC `{}` renamed or reordered", a.steady_state_name));
            continue;
        }
        if a.threshold != b.threshold {
            out.push(format!("VaC `{}` threshold changed", a.steady_state_name));
        }
        if a.probe.sample_interval_s != b.probe.sample_interval_s || a.probe.duration_s != b.probe.duration_s {
            out.push(format!("VaC `{}` timing changed", a.steady_state_name));
        }
        match (&a.probe.target, &b.probe.target) {
            (ProbeTarget::ClusterApi { quantity: qa, .. }, ProbeTarget::ClusterApi { quantity: qb, .. }) if qa == qb => {}
            (
                ProbeTarget::HttpLoad {
                    virtual_users: va,
                    quantity: qa,
                    ..
                },
                ProbeTarget::HttpLoad {
                    virtual_users: vb,
                    quantity: qb,
                    ..
                },
            ) if qa == qb && va == vb => {}
            _ => out.push(format!("VaC `{}` tool or measured quantity changed", a.steady_state_name)),
        }
    }
    if original.faults.len() != updated.faults.len() {
        out.push(String::from("number of faults changed"));
    }
    for (a, b) in original.faults.iter().zip(&updated.faults) {
        if a.name != b.name {
            out.push(format!("fault `{}` renamed or reordered", a.name));
            continue;
        }
        if a.action != b.action {
            out.push(format!("fault `{}` subtype or parameters changed", a.name));
        }
        if a.selector.mode != b.selector.mode {
            out.push(format!("fault `{}` selector mode changed", a.name));
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::fault::{FaultAction, FaultSelector, SelectorMode};
    use crate::manifest::LabelSelector;
    use crate::probe::{Aggregation, ClusterQuantity, Comparator, ProbeSpec, Threshold};
    use alloc::vec;

    pub(crate) fn pod_vac(name: &str, app: &str) -> VaCSpec {
        let target = ProbeTarget::ClusterApi {
            namespace: "default".into(),
            labels: [("app".into(), app.into())].into_iter().collect(),
            quantity: ClusterQuantity::PodCount,
        };
        VaCSpec {
            steady_state_name: name.into(),
            probe: ProbeSpec::new(target, 1, 10).unwrap(),
            threshold: Threshold::new(Comparator::Ge, 1.0, Aggregation::EverySample),
            script_text: None,
        }
    }

    pub(crate) fn pod_kill(name: &str, app: &str) -> FaultSpec {
        FaultSpec::new(
            name,
            FaultAction::PodKill { grace_period_s: 0 },
            FaultSelector {
                scope: LabelSelector::new("default", &[("app", app)]),
                mode: SelectorMode::One,
            },
        )
        .unwrap()
    }

    pub(crate) fn item(stage: Stage, task: Task, start: u32, dur: u32) -> ScheduledItem {
        ScheduledItem {
            stage,
            task,
            start_offset_s: start,
            duration_s: dur,
        }
    }

    pub(crate) fn vac_task(name: &str) -> Task {
        Task::RunVac {
            steady_state: name.into(),
        }
    }

    pub(crate) fn fault_task(name: &str) -> Task {
        Task::InjectFault { fault: name.into() }
    }

    pub(crate) fn nginx_plan() -> ExperimentPlan {
        ExperimentPlan {
            stage_durations: StageDurations {
                pre_s: 15,
                fault_s: 30,
                post_s: 15,
            },
            items: vec![
                item(Stage::Pre, vac_task("pod-availability"), 0, 10),
                item(Stage::Fault, fault_task("nginx-pod-kill"), 0, 30),
                item(Stage::Post, vac_task("pod-availability"), 0, 10),
            ],
            timeline_summary: "pre 15 s, kill at 15 s, post 15 s".into(),
            vacs: vec![pod_vac("pod-availability", "nginx")],
            faults: vec![pod_kill("nginx-pod-kill", "nginx")],
        }
    }

    #[test]
    fn nginx_plan_is_valid_within_a_minute() {
        nginx_plan().validate(Some(60)).unwrap();
        assert!(nginx_plan().validate(Some(59)).is_err());
    }

    #[test]
    fn missing_post_vac_is_rejected() {
        let mut plan = nginx_plan();
        plan.items.pop();
        assert!(plan.validate(None).unwrap_err().0.contains("post"));
    }

    #[test]
    fn omitted_fault_is_rejected() {
        let mut plan = nginx_plan();
        plan.items.remove(1);
        assert!(plan.validate(None).unwrap_err().0.contains("exactly once"));
    }

    #[test]
    fn fault_in_pre_stage_is_rejected() {
        let mut plan = nginx_plan();
        plan.items.push(item(Stage::Pre, fault_task("nginx-pod-kill"), 0, 5));
        assert!(plan.validate(None).is_err());
    }

    #[test]
    fn item_past_stage_end_is_rejected() {
        let mut plan = nginx_plan();
        plan.items[0].start_offset_s = 6;
        assert!(plan.validate(None).is_err());
    }

    #[test]
    fn selector_rewrite_keeps_intent() {
        let a = nginx_plan();
        let mut b = a.clone();
        b.faults[0].selector.scope = LabelSelector::new("default", &[("app", "web")]);
        b.vacs[0] = pod_vac("pod-availability", "web");
        assert!(intent_changes(&a, &b).is_empty());
        b.faults[0].action = FaultAction::PodFailure;
        assert_eq!(intent_changes(&a, &b).len(), 1);
    }
}
