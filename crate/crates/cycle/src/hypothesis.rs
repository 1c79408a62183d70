//! Hypothesis phase: the steady-state loop and the failure scenario.

use chaos_core::ledger::Phase;
use chaos_core::plan::check_probe_target;
use chaos_core::{
    run_probe, Aggregation, ClusterBackend, FailureScenario, FaultSpec, Hypothesis, ManifestSet, Measurement, ProbeSpec, ProcessedContext,
    SteadyState, Threshold, VaCSpec,
};

use crate::agents::{FaultDraft, FaultSketch, ProbeDraft, ScenarioDraft, StateDraft, Sufficiency, ThresholdDraft, VacScript};
use crate::error::PhaseError;
use crate::gateway::{Gateway, PromptContext, MAX_ATTEMPTS};
use crate::prompts::{context_block, json, manifests_block};

/// Longest baseline inspection, in seconds.
pub const BASELINE_MAX_S: u32 = 10;
pub const DEFAULT_MAX_STEADY_STATES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct StateDraftWithProbe {
    pub name: String,
    pub description: String,
    pub probe: ProbeSpec,
}

fn base_context(ctx: &ProcessedContext, set: &ManifestSet) -> PromptContext {
    [("context".to_string(), context_block(ctx)), ("manifests".to_string(), manifests_block(set))].into()
}

fn existing_block(existing: &[SteadyState]) -> String {
    if existing.is_empty() {
        return "(none)".into();
    }
    existing.iter().map(|s| format!("- {}: {}", s.name, s.description)).collect::<Vec<_>>().join("\n")
}

/// Drafts one new steady state and the probe that inspects it. A colliding
/// name gets one retry; the probe must resolve against `set` and differ from
/// every existing probe target.
pub fn draft_steady_state(
    ctx: &ProcessedContext,
    set: &ManifestSet,
    existing: &[SteadyState],
    gateway: &Gateway,
) -> Result<StateDraftWithProbe, PhaseError> {
    let mut prompt = base_context(ctx, set);
    prompt.insert("existing steady states".into(), existing_block(existing));
    let draft = gateway
        .complete_checked::<StateDraft, _>(Phase::Hyp, &prompt, 2, |d| {
            if existing.iter().any(|s| s.name == d.name) {
                Err(format!("the name `{}` is already used", d.name))
            } else {
                Ok(d)
            }
        })?
        .map_err(PhaseError::DuplicateStateExhausted)?;

    prompt.insert("steady state".into(), format!("{}: {}", draft.name, draft.description));
    let probe = gateway
        .complete_checked::<ProbeDraft, _>(Phase::Hyp, &prompt, MAX_ATTEMPTS, |p| {
            check_probe_target(&p.probe.target, set)?;
            if existing.iter().any(|s| s.probe.target == p.probe.target) {
                return Err("an existing steady state already inspects this target".into());
            }
            Ok(p.probe)
        })?
        .map_err(PhaseError::ProbeInvalidExhausted)?;
    Ok(StateDraftWithProbe {
        name: draft.name,
        description: draft.description,
        probe,
    })
}

/// Runs the draft's probe, shortened to [`BASELINE_MAX_S`], on the healthy cluster.
pub fn inspect_baseline<C: ClusterBackend>(draft: &StateDraftWithProbe, cluster: &mut C) -> Result<Measurement, PhaseError> {
    Ok(run_probe(cluster, &draft.probe.shortened(BASELINE_MAX_S), Aggregation::EverySample)?)
}

/// Asks for a threshold and accepts it only when it holds for the baseline.
/// Returns the threshold with the baseline re-aggregated to match it.
pub fn define_threshold(
    draft: &StateDraftWithProbe,
    baseline: &Measurement,
    gateway: &Gateway,
) -> Result<(Threshold, Measurement), PhaseError> {
    let quantity = draft.probe.quantity();
    let prompt: PromptContext = [
        ("steady state".to_string(), format!("{}: {}", draft.name, draft.description)),
        ("probe".to_string(), json(&draft.probe)),
        ("unit".to_string(), quantity.unit().to_string()),
        ("baseline samples".to_string(), json(&baseline.values())),
    ]
    .into();
    gateway
        .complete_checked::<ThresholdDraft, _>(Phase::Hyp, &prompt, MAX_ATTEMPTS, |t| {
            let threshold = t.threshold;
            threshold.validate_for(quantity).map_err(|e| e.to_string())?;
            let rebased = baseline.reaggregate(threshold.aggregation);
            if !threshold.evaluate(&rebased) {
                return Err(format!("threshold {threshold} fails against the baseline"));
            }
            Ok((threshold, rebased))
        })?
        .map_err(PhaseError::ThresholdInconsistent)
}

/// Builds the VaC for a finished steady state; the generated script is kept verbatim.
pub fn build_vac(draft: &StateDraftWithProbe, threshold: Threshold, gateway: &Gateway) -> Result<VaCSpec, PhaseError> {
    let prompt: PromptContext = [
        ("steady state".to_string(), draft.name.clone()),
        ("probe".to_string(), json(&draft.probe)),
        ("threshold".to_string(), threshold.to_string()),
    ]
    .into();
    let script = gateway.complete::<VacScript>(Phase::Hyp, &prompt)?.parsed.script;
    Ok(VaCSpec {
        steady_state_name: draft.name.clone(),
        probe: draft.probe.clone(),
        threshold,
        script_text: Some(script),
    })
}

/// The agent's verdict, or `enough` without asking once `max_states` is reached.
pub fn steady_states_sufficient(
    states: &[SteadyState],
    ctx: &ProcessedContext,
    max_states: usize,
    gateway: &Gateway,
) -> Result<Sufficiency, PhaseError> {
    assert!(!states.is_empty(), "sufficiency needs at least one steady state");
    if states.len() >= max_states {
        return Ok(Sufficiency {
            enough: true,
            reason: format!("reached the cap of {max_states} steady states"),
        });
    }
    let prompt: PromptContext = [
        ("context".to_string(), context_block(ctx)),
        ("steady states".to_string(), existing_block(states)),
    ]
    .into();
    Ok(gateway.complete::<Sufficiency>(Phase::Hyp, &prompt)?.parsed)
}

/// Defines steady states until the judge (or the cap) says enough.
pub fn define_steady_states<C: ClusterBackend>(
    ctx: &ProcessedContext,
    set: &ManifestSet,
    cluster: &mut C,
    max_states: usize,
    gateway: &Gateway,
) -> Result<Vec<SteadyState>, PhaseError> {
    let mut states: Vec<SteadyState> = Vec::new();
    loop {
        let draft = draft_steady_state(ctx, set, &states, gateway)?;
        let baseline = inspect_baseline(&draft, cluster)?;
        let (threshold, baseline) = define_threshold(&draft, &baseline, gateway)?;
        let vac = build_vac(&draft, threshold, gateway)?;
        states.push(SteadyState::new(draft.name, draft.description, draft.probe, baseline, threshold, vac)?);
        if steady_states_sufficient(&states, ctx, max_states, gateway)?.enough {
            return Ok(states);
        }
    }
}

pub fn draft_failure_scenario(ctx: &ProcessedContext, set: &ManifestSet, states: &[SteadyState], gateway: &Gateway) -> Result<ScenarioDraft, PhaseError> {
    let mut prompt = base_context(ctx, set);
    prompt.insert("steady states".into(), existing_block(states));
    Ok(gateway.complete::<ScenarioDraft>(Phase::Hyp, &prompt)?.parsed)
}

/// Refines each sketched fault into concrete parameters, one call per fault.
pub fn refine_faults(draft: &ScenarioDraft, set: &ManifestSet, gateway: &Gateway) -> Result<FailureScenario, PhaseError> {
    let resources = set.resources().map(|r| format!("- {} labels {:?}", r.id(), r.pod_labels())).collect::<Vec<_>>().join("\n");
    let mut faults: Vec<FaultSpec> = Vec::new();
    for sketch in &draft.faults {
        let prompt: PromptContext = [
            ("scenario".to_string(), draft.narrative.clone()),
            ("fault".to_string(), json(sketch)),
            ("resources".to_string(), resources.clone()),
        ]
        .into();
        let fault = gateway
            .complete_checked::<FaultDraft, _>(Phase::Hyp, &prompt, MAX_ATTEMPTS, |f| accept_fault(sketch, f.fault, set))?
            .map_err(PhaseError::SelectorUnresolvableExhausted)?;
        faults.push(fault);
    }
    Ok(FailureScenario::new(draft.narrative.clone(), faults)?)
}

fn accept_fault(sketch: &FaultSketch, fault: FaultSpec, set: &ManifestSet) -> Result<FaultSpec, String> {
    if fault.name != sketch.name || fault.action.subtype() != sketch.subtype {
        return Err(format!("expected fault `{}` of subtype {}", sketch.name, sketch.subtype));
    }
    fault.validate_against(set).map_err(|e| e.to_string())?;
    Ok(fault)
}

/// The whole phase: steady states, then the scenario, then the hypothesis.
pub fn define_hypothesis<C: ClusterBackend>(
    ctx: &ProcessedContext,
    set: &ManifestSet,
    cluster: &mut C,
    max_states: usize,
    gateway: &Gateway,
) -> Result<Hypothesis, PhaseError> {
    assert!(ctx.rejection.is_none(), "hypothesis phase needs an accepted context");
    let states = define_steady_states(ctx, set, cluster, max_states, gateway)?;
    let draft = draft_failure_scenario(ctx, set, &states, gateway)?;
    let scenario = refine_faults(&draft, set, gateway)?;
    Ok(Hypothesis::new(states, scenario)?)
}
