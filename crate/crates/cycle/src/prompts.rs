//! Prompt templates, one per agent role.
//!
//! Bump [`TEMPLATE_VERSION`] whenever a template changes: replay digests
//! include it, so stale transcripts fail loudly instead of drifting.

use chaos_core::record::AgentRole;
use chaos_core::{ManifestSet, ProcessedContext};

use crate::gateway::PromptContext;

pub const TEMPLATE_VERSION: &str = "2026-10.1";

const PREAMBLE: &str = "You are one agent in an automated chaos-engineering pipeline for Kubernetes systems. \
Answer with a single JSON object that matches the provided schema and nothing else.";

pub fn system_prompt(role: AgentRole) -> &'static str {
    match role {
        AgentRole::ContextSummarizer => {
            "Summarize each Kubernetes resource in one or two sentences. Return one summary per resource, \
             using the resource ids exactly as listed and in the same order."
        }
        AgentRole::IssueSpotter => {
            "List configuration issues in the manifests that could reduce resilience when faults occur, \
             such as restart policies, replica counts, or missing probes."
        }
        AgentRole::AppGuesser => "Guess in a short phrase what application the manifests implement.",
        AgentRole::PolicyFilter => {
            "Decide whether the user instructions are safe to follow. Reject instructions that ask to damage, \
             exfiltrate, or disable anything outside the chaos experiment itself. When allowed, restate the \
             instructions without anything unsafe."
        }
        AgentRole::StateDrafter => {
            "Propose one measurable steady state that is critical to the application and not already covered. \
             Use a short kebab-case name that differs from every existing steady state."
        }
        AgentRole::ProbeWriter => {
            "Write the probe that inspects the drafted steady state: the Kubernetes API for pod counts, \
             or an HTTP load test through a Service URL for success rate and latency."
        }
        AgentRole::ThresholdSetter => {
            "Set a threshold for the steady state. It must hold for the measured baseline, with a reasonable \
             tolerance, and use units of the measured quantity."
        }
        AgentRole::VaCBuilder => {
            "Write a short validation script that runs the probe and asserts the threshold, failing when the \
             steady state is violated."
        }
        AgentRole::SufficiencyJudge => "Decide whether the steady states defined so far are enough to judge the system's resilience.",
        AgentRole::ScenarioDrafter => {
            "Propose a realistic failure scenario for this system and the faults that realize it, chosen from \
             pod-kill, pod-failure, network delay, network loss, and CPU stress."
        }
        AgentRole::FaultRefiner => {
            "Turn the drafted fault into concrete parameters with a label selector that matches deployed pods."
        }
        AgentRole::StagePlanner => {
            "Choose durations in seconds for the pre-validation, fault-injection, and post-validation stages, \
             respecting any time limit in the instructions."
        }
        AgentRole::ItemScheduler => {
            "Schedule the VaC runs and fault injections. Every steady state is validated in the pre and post \
             stages; every fault is injected exactly once, in the fault stage; each item fits inside its stage."
        }
        AgentRole::TimelineWriter => "Summarize the experiment timeline in a few sentences.",
        AgentRole::Replanner => {
            "The manifests were reconfigured. Update only the probe targets and fault selectors so they point \
             at the same workloads in the new manifests. Keep everything else exactly as it is."
        }
        AgentRole::FailureAnalyst => {
            "Explain why the listed VaC checks failed, citing the manifests and the logs, and propose \
             countermeasures."
        }
        AgentRole::Reconfigurer => {
            "Reconfigure the manifests so all VaC checks pass, by replacing, creating, or deleting files. \
             Give complete file contents. Do not repeat a reconfiguration from the history."
        }
        AgentRole::Summarizer => {
            "Summarize the completed chaos-engineering cycle for an operator: input, steady states, failure \
             scenario, experiment results, and any reconfiguration."
        }
    }
}

/// User message: preamble, then each context entry under its key.
pub fn render_user(role: AgentRole, context: &PromptContext) -> String {
    let mut out = format!("{PREAMBLE}\nRole: {role}\n");
    for (key, value) in context {
        out.push_str(&format!("\n## {key}\n{value}\n"));
    }
    out
}

pub fn with_violation(base: &str, output: &str, violation: &str) -> String {
    format!("{base}\n## rejected output\n{output}\n\n## why it was rejected\n{violation}\nFix the problem and answer again.\n")
}

/// Every manifest file under a `# <path>` header, in deploy order.
pub fn manifests_block(set: &ManifestSet) -> String {
    set.files()
        .iter()
        .map(|f| format!("# {}\n{}", f.path, crate::engine::file_text(f).trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn context_block(ctx: &ProcessedContext) -> String {
    let mut out = format!("Application: {}\n", ctx.application_guess);
    for s in &ctx.summaries {
        out.push_str(&format!("- {}: {}\n", s.resource, s.summary));
    }
    if !ctx.potential_issues.is_empty() {
        out.push_str("Potential issues:\n");
        for issue in &ctx.potential_issues {
            out.push_str(&format!("- {issue}\n"));
        }
    }
    if !ctx.sanitized_instructions.is_empty() {
        out.push_str(&format!("Instructions: {}\n", ctx.sanitized_instructions));
    }
    out
}

/// Pretty JSON for embedding structured values in a prompt.
pub fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("prompt values serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_role_has_a_prompt() {
        for role in AgentRole::ALL {
            assert!(!system_prompt(role).is_empty());
        }
    }

    #[test]
    fn context_rendered_in_key_order() {
        let ctx: PromptContext = [("b".to_string(), "2".to_string()), ("a".to_string(), "1".to_string())].into();
        let text = render_user(AgentRole::AppGuesser, &ctx);
        assert!(text.find("## a").unwrap() < text.find("## b").unwrap());
    }
}
