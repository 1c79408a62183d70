//! Pre-processing, post-processing, and the end-to-end cycle.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chaos_core::ledger::{CostLedger, Phase};
use chaos_core::{ClusterBackend, CycleOutcome, CycleRecord, LoopRecord, ManifestSet, ModelError, ProcessedContext, ProjectInput, ResourceSummary};
use regex::Regex;

use crate::agents::{AppGuess, ContextSummaries, IssueList, PolicyDecision, SummaryDraft};
use crate::config::CycleConfig;
use crate::engine::write_output_folder;
use crate::error::PhaseError;
use crate::experiment::{execute_experiment, plan_experiment};
use crate::gateway::{Gateway, PromptContext, MAX_ATTEMPTS};
use crate::hypothesis::define_hypothesis;
use crate::improvement::{run_improvement_loop, source_files, ClusterProvider, LoopObserver};
use crate::project::validate_project_input;
use crate::prompts::{json, manifests_block};
use crate::yaml;

/// Instructions matching any of these are rejected before the policy agent runs.
const DENYLIST: &[&str] = &[
    r"(?i)\brm\s+-rf\s+/",
    r"(?i)\bmkfs(\.\w+)?\b",
    r"(?i)\bdrop\s+(database|table)\b",
    r"(?i)\bdelete\s+(the\s+)?namespace\s+kube-system\b",
    r"(?i)\b(shutdown|power\s*off|reboot)\s+(the\s+)?(host|node)s?\b",
];

fn denylist() -> &'static [Regex] {
    static COMPILED: OnceLock<Vec<Regex>> = OnceLock::new();
    COMPILED.get_or_init(|| DENYLIST.iter().map(|p| Regex::new(p).expect("denylist patterns compile")).collect())
}

/// The denylist pattern the instructions hit, if any.
pub fn screen_instructions(text: &str) -> Option<&'static str> {
    denylist().iter().zip(DENYLIST).find(|(re, _)| re.is_match(text)).map(|(_, p)| *p)
}

/// Reads a time limit such as "within 1 minute" or "within 45 seconds".
pub fn time_limit_s(text: &str) -> Option<u32> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?i)\b(?:within|under|at most|no more than|less than)\s+(\d+|one|a|an|two|three|five|ten)\s*(minutes?|mins?|m|seconds?|secs?|s)\b")
            .expect("limit pattern compiles")
    });
    let caps = re.captures(text)?;
    let n: u32 = match caps[1].to_ascii_lowercase().as_str() {
        "one" | "a" | "an" => 1,
        "two" => 2,
        "three" => 3,
        "five" => 5,
        "ten" => 10,
        digits => digits.parse().ok()?,
    };
    let unit = caps[2].to_ascii_lowercase();
    Some(if unit.starts_with('m') { n.checked_mul(60)? } else { n })
}

#[derive(Debug)]
pub enum Preprocessed<C> {
    Accepted { context: ProcessedContext, cluster: C },
    Rejected(ProcessedContext),
}

/// Policy screening, then deployment, then context filling. A rejection
/// returns before anything is deployed.
pub fn preprocess<P: ClusterProvider>(
    set: &ManifestSet,
    instructions: Option<&str>,
    provider: &mut P,
    gateway: &Gateway,
) -> Result<Preprocessed<P::Cluster>, PhaseError> {
    let instructions = instructions.map(str::trim).unwrap_or("");
    let mut sanitized = String::new();
    if !instructions.is_empty() {
        if let Some(pattern) = screen_instructions(instructions) {
            return Ok(Preprocessed::Rejected(ProcessedContext::rejected(format!("instructions match denylist pattern {pattern}"))));
        }
        let prompt: PromptContext = [("instructions".to_string(), instructions.to_string())].into();
        let decision = gateway.complete::<PolicyDecision>(Phase::Pre, &prompt)?.parsed;
        if !decision.allowed {
            return Ok(Preprocessed::Rejected(ProcessedContext::rejected(decision.reason)));
        }
        sanitized = if decision.sanitized_instructions.trim().is_empty() {
            instructions.to_string()
        } else {
            decision.sanitized_instructions
        };
    }

    let cluster = provider.deploy(set).map_err(PhaseError::DeployFailed)?;

    let ids: Vec<String> = set.resources().map(|r| r.id().to_string()).collect();
    let mut prompt: PromptContext = [
        ("manifests".to_string(), manifests_block(set)),
        ("resources".to_string(), ids.join("\n")),
    ]
    .into();
    let summaries: Vec<ResourceSummary> = gateway
        .complete_checked::<ContextSummaries, _>(Phase::Pre, &prompt, MAX_ATTEMPTS, |s| {
            let got: Vec<&str> = s.summaries.iter().map(|r| r.resource.as_str()).collect();
            if got != ids {
                return Err(format!("expected summaries for {ids:?} in that order, got {got:?}"));
            }
            Ok(s.summaries)
        })?
        .map_err(|v| PhaseError::Model(ModelError::Invalid { what: "context", reason: v }))?;
    prompt.insert("summaries".into(), json(&summaries));
    let potential_issues = gateway.complete::<IssueList>(Phase::Pre, &prompt)?.parsed.issues;
    prompt.insert("potential issues".into(), json(&potential_issues));
    let application_guess = gateway.complete::<AppGuess>(Phase::Pre, &prompt)?.parsed.application;
    let context = ProcessedContext {
        summaries,
        potential_issues,
        application_guess,
        sanitized_instructions: sanitized,
        rejection: None,
    };
    context.validate(set)?;
    Ok(Preprocessed::Accepted { context, cluster })
}

fn outcome_phrases(outcome: &CycleOutcome, improvements: usize) -> Vec<String> {
    match outcome {
        CycleOutcome::SatisfiedNoChange => vec!["satisfied".into(), "no reconfiguration".into()],
        CycleOutcome::SatisfiedAfterImprovement { loops } => vec!["satisfied".into(), format!("{loops} improvement loop")],
        CycleOutcome::Aborted { .. } => vec!["aborted".into(), format!("{improvements} improvement loop")],
    }
}

/// What a cycle summary must mention, as lowercase substrings.
pub fn summary_requirements(record: &CycleRecord) -> Vec<String> {
    let hypothesis = record.hypothesis.as_ref().expect("summary needs a hypothesis");
    let mut out: Vec<String> = hypothesis.steady_states.iter().map(|s| s.name.to_lowercase()).collect();
    out.push(hypothesis.scenario.narrative.to_lowercase());
    out.extend(outcome_phrases(&record.outcome, record.reconfigurations()));
    out
}

pub fn summarize_cycle(record: &CycleRecord, gateway: &Gateway) -> Result<String, PhaseError> {
    let hypothesis = record.hypothesis.as_ref().expect("summary needs a hypothesis");
    let required = summary_requirements(record);
    let loops: Vec<serde_json::Value> = record
        .loops
        .iter()
        .enumerate()
        .map(|(i, l)| {
            serde_json::json!({
                "execution": i,
                "passed": l.passed(),
                "failed": l.result.failed_vacs().map(|o| o.name.clone()).collect::<Vec<_>>(),
                "reconfiguration": l.reconfiguration.as_ref().map(|r| &r.rationale),
            })
        })
        .collect();
    let prompt: PromptContext = [
        ("input".to_string(), record.input.manifests.iter().map(|m| m.path.clone()).collect::<Vec<_>>().join(", ")),
        ("hypothesis".to_string(), hypothesis.statement.clone()),
        ("scenario".to_string(), hypothesis.scenario.narrative.clone()),
        ("executions".to_string(), json(&loops)),
        ("outcome".to_string(), record.outcome.to_string()),
        ("must mention".to_string(), required.join("\n")),
    ]
    .into();
    gateway
        .complete_checked::<SummaryDraft, _>(Phase::Post, &prompt, MAX_ATTEMPTS, |d| {
            let lower = d.summary.to_lowercase();
            match required.iter().find(|r| !lower.contains(r.as_str())) {
                Some(missing) => Err(format!("the summary does not mention \"{missing}\"")),
                None => Ok(d.summary),
            }
        })?
        .map_err(PhaseError::SummaryIncompleteExhausted)
}

/// Summary assembled without an agent, for cycles the summarizer cannot cover.
pub fn mechanical_summary(record: &CycleRecord) -> String {
    let mut out = format!("Cycle outcome: {}.", record.outcome);
    out.push_str(&format!(
        " {} experiment execution(s), {} reconfiguration(s).",
        record.experiment_runs(),
        record.reconfigurations()
    ));
    for d in &record.diagnostics {
        out.push_str(&format!(" {d}."));
    }
    out
}

/// The ledger as written to `ledger.json`.
pub fn ledger_json(ledger: &CostLedger) -> String {
    serde_json::to_string_pretty(ledger).expect("ledgers serialize") + "\n"
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid input: {0}")]
    Input(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Writes loop artifacts as they are produced. Without a directory it only
/// counts; write errors are kept and reported when the cycle ends.
struct Artifacts {
    dir: Option<PathBuf>,
    error: Option<PipelineError>,
}

impl Artifacts {
    fn write(&mut self, rel: impl AsRef<Path>, text: &str) {
        let Some(dir) = &self.dir else { return };
        if self.error.is_some() {
            return;
        }
        let path = dir.join(rel);
        let result = path.parent().map_or(Ok(()), fs::create_dir_all).and_then(|_| fs::write(&path, text));
        if let Err(source) = result {
            self.error = Some(PipelineError::Io { path, source });
        }
    }

    fn write_json<T: serde::Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) {
        self.write(rel, &(serde_json::to_string_pretty(value).expect("artifacts serialize") + "\n"));
    }
}

impl LoopObserver for Artifacts {
    fn executed<C: ClusterBackend>(&mut self, index: usize, record: &LoopRecord, cluster: &C) {
        let dir = PathBuf::from(format!("loop-{index}"));
        self.write_json(dir.join("plan.json"), &record.plan);
        self.write_json(dir.join("workflow.json"), &record.workflow);
        self.write(dir.join("workflow.yaml"), &yaml::to_yaml(&record.workflow.to_document()));
        self.write_json(dir.join("result.json"), &record.result);
        let events: String = cluster
            .event_log()
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
            .collect();
        self.write(dir.join("events.jsonl"), &events);
    }

    fn improved(&mut self, index: usize, record: &LoopRecord) {
        let dir = PathBuf::from(format!("loop-{index}"));
        if let Some(report) = &record.report {
            self.write_json(dir.join("report.json"), report);
        }
        if let Some(reconf) = &record.reconfiguration {
            self.write_json(dir.join("reconfig.json"), reconf);
        }
    }
}

/// Runs one full cycle. Phase errors end the cycle as `Aborted` with a
/// diagnostic; only invalid input and artifact write failures are errors.
/// With `out`, artifacts are written there.
pub fn run_cycle<P: ClusterProvider>(
    input: &ProjectInput,
    config: &CycleConfig,
    gateway: &Gateway,
    provider: &mut P,
    out: Option<&Path>,
) -> Result<CycleRecord, PipelineError> {
    let set = validate_project_input(input)?;
    let calls_before = gateway.calls().len();
    let mut record = CycleRecord::new(input.clone());
    let mut artifacts = Artifacts {
        dir: out.map(Path::to_path_buf),
        error: None,
    };
    let mut final_set = set.clone();
    let mut policy_abort = false;
    match drive(&mut record, &set, config, gateway, provider, &mut artifacts, &mut final_set, &mut policy_abort) {
        Ok(outcome) => record.outcome = outcome,
        Err(e) => {
            record.diagnostics.push(e.to_string());
            record.outcome = CycleOutcome::Aborted { reason: e.to_string() };
        }
    }
    record.final_set_validated = record.outcome.is_satisfied();
    record.summary = if policy_abort || record.hypothesis.is_none() {
        mechanical_summary(&record)
    } else {
        match summarize_cycle(&record, gateway) {
            Ok(s) => s,
            Err(e) => {
                record.diagnostics.push(e.to_string());
                mechanical_summary(&record)
            }
        }
    };
    record.calls = gateway.calls()[calls_before..].to_vec();
    record.ledger = record.ledger_from_calls();

    if let Some(dir) = out {
        artifacts.write_json("record.json", &record);
        artifacts.write("ledger.json", &ledger_json(&record.ledger));
        if let Some(e) = artifacts.error.take() {
            return Err(e);
        }
        let dest = dir.join("output");
        write_output_folder(&final_set, &input.deploy_config_path, &input.deploy_config, &dest)
            .map_err(|source| PipelineError::Io { path: dest, source })?;
    }
    Ok(record)
}

#[allow(clippy::too_many_arguments)]
fn drive<P: ClusterProvider>(
    record: &mut CycleRecord,
    set: &ManifestSet,
    config: &CycleConfig,
    gateway: &Gateway,
    provider: &mut P,
    artifacts: &mut Artifacts,
    final_set: &mut ManifestSet,
    policy_abort: &mut bool,
) -> Result<CycleOutcome, PhaseError> {
    let (context, mut cluster) = match preprocess(set, record.input.instructions.as_deref(), provider, gateway)? {
        Preprocessed::Accepted { context, cluster } => (context, cluster),
        Preprocessed::Rejected(context) => {
            let reason = context.rejection.clone().unwrap_or_default();
            record.context = Some(context);
            *policy_abort = true;
            return Ok(CycleOutcome::Aborted { reason: format!("policy: {reason}") });
        }
    };
    record.context = Some(context.clone());
    let hypothesis = define_hypothesis(&context, set, &mut cluster, config.max_steady_states, gateway)?;
    record.hypothesis = Some(hypothesis.clone());

    let limit = config.max_experiment_s.or_else(|| time_limit_s(&context.sanitized_instructions));
    let plan = plan_experiment(&context, &hypothesis, limit, gateway)?;
    let (workflow, result) = execute_experiment(&plan, &mut cluster)?;
    record.loops.push(LoopRecord {
        plan: plan.clone(),
        workflow,
        result,
        report: None,
        reconfiguration: None,
        manifest_set_after: source_files(set),
    });
    artifacts.executed(0, &record.loops[0], &cluster);

    let end = run_improvement_loop(set, &hypothesis, &plan, provider, gateway, config.max_loops, &mut record.loops, artifacts);
    if let Some(last) = record.loops.last() {
        let files: Vec<_> = last
            .manifest_set_after
            .iter()
            .map(|f| yaml::parse_manifest_file(&f.path, &f.text))
            .collect::<Result<_, _>>()?;
        *final_set = ManifestSet::new(files)?;
    }
    Ok(end?.outcome)
}
