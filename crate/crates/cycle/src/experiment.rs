//! Experiment phase: planning, replanning after reconfiguration, execution.

use chaos_core::ledger::Phase;
use chaos_core::{
    compile_workflow, execute_workflow, intent_changes, ClusterBackend, ExperimentPlan, ExperimentResult, Hypothesis, ManifestSet,
    ProcessedContext, StageDurations, WorkflowManifest,
};

use crate::agents::{ItemsDraft, ReplanDraft, StageDraft, TimelineDraft};
use crate::error::PhaseError;
use crate::gateway::{Gateway, PromptContext, MAX_ATTEMPTS};
use crate::prompts::{context_block, json};

fn limit_text(max_total_s: Option<u32>) -> String {
    match max_total_s {
        Some(s) => format!("The three stages together must last at most {s} s."),
        None => "No time limit.".into(),
    }
}

/// Stage durations, then the item schedule, then the timeline summary.
pub fn plan_experiment(
    ctx: &ProcessedContext,
    hypothesis: &Hypothesis,
    max_total_s: Option<u32>,
    gateway: &Gateway,
) -> Result<ExperimentPlan, PhaseError> {
    let mut prompt: PromptContext = [
        ("context".to_string(), context_block(ctx)),
        ("hypothesis".to_string(), hypothesis.statement.clone()),
        ("steady states".to_string(), json(&hypothesis.vacs())),
        ("faults".to_string(), json(&hypothesis.scenario.faults)),
        ("time limit".to_string(), limit_text(max_total_s)),
    ]
    .into();
    let stages = gateway
        .complete_checked::<StageDraft, _>(Phase::Expt, &prompt, MAX_ATTEMPTS, |d| {
            let stages = StageDurations {
                pre_s: d.pre_s,
                fault_s: d.fault_s,
                post_s: d.post_s,
            };
            stages.validate(max_total_s).map_err(|e| e.to_string())?;
            Ok(stages)
        })?
        .map_err(PhaseError::PlanInvalidExhausted)?;

    prompt.insert("stage durations".into(), json(&stages));
    let mut plan = gateway
        .complete_checked::<ItemsDraft, _>(Phase::Expt, &prompt, MAX_ATTEMPTS, |d| {
            let plan = ExperimentPlan {
                stage_durations: stages,
                items: d.items,
                timeline_summary: "pending".into(),
                vacs: hypothesis.vacs(),
                faults: hypothesis.scenario.faults.clone(),
            };
            plan.validate_against(hypothesis, max_total_s).map_err(|e| e.to_string())?;
            Ok(plan)
        })?
        .map_err(PhaseError::PlanInvalidExhausted)?;

    prompt.insert("items".into(), json(&plan.items));
    plan.timeline_summary = gateway.complete::<TimelineDraft>(Phase::Expt, &prompt)?.parsed.summary;
    plan.validate_against(hypothesis, max_total_s).map_err(|e| PhaseError::PlanInvalidExhausted(e.to_string()))?;
    Ok(plan)
}

/// Points the plan's probes and fault selectors at `new_set`. The agent
/// returns full VaC and fault specs; anything beyond targets and selectors
/// changing rejects the output.
pub fn replan_experiment(prev: &ExperimentPlan, old_set: &ManifestSet, new_set: &ManifestSet, gateway: &Gateway) -> Result<ExperimentPlan, PhaseError> {
    let changes = chaos_core::diff_manifest_sets(old_set, new_set);
    let prompt: PromptContext = [
        ("plan".to_string(), json(&prev)),
        ("manifest changes".to_string(), json(&changes)),
        ("new manifests".to_string(), crate::prompts::manifests_block(new_set)),
    ]
    .into();
    let mut intent_violation = false;
    let outcome = gateway.complete_checked::<ReplanDraft, _>(Phase::Expt, &prompt, MAX_ATTEMPTS, |d| {
        let plan = ExperimentPlan {
            vacs: d.vacs,
            faults: d.faults,
            ..prev.clone()
        };
        let changed = intent_changes(prev, &plan);
        intent_violation = !changed.is_empty();
        if intent_violation {
            return Err(changed.join("; "));
        }
        plan.validate_targets(new_set).map_err(|e| e.to_string())?;
        plan.validate(None).map_err(|e| e.to_string())?;
        Ok(plan)
    })?;
    outcome.map_err(|v| {
        if intent_violation {
            PhaseError::IntentChanged(v)
        } else {
            PhaseError::SelectorUnresolvableExhausted(v)
        }
    })
}

/// Compiles and runs the plan on a deployed, reconciled cluster.
pub fn execute_experiment<C: ClusterBackend>(plan: &ExperimentPlan, cluster: &mut C) -> Result<(WorkflowManifest, ExperimentResult), PhaseError> {
    let workflow = compile_workflow(plan);
    let result = execute_workflow(&workflow, cluster)?;
    Ok((workflow, result))
}
