//! Analysis and improvement: failure reports, reconfiguration, and the
//! bounded improvement loop.

use chaos_core::ledger::Phase;
use chaos_core::{
    check_results, AnalysisReport, ClusterBackend, ClusterError, CycleOutcome, ExperimentPlan, ExperimentResult, Hypothesis, ItemOutcome,
    LoopRecord, ManifestSet, Reconfiguration, SimCluster, SimConfig, SourceFile,
};

use crate::agents::{AnalysisDraft, ReconfigDraft};
use crate::engine::{apply_reconfiguration, file_text};
use crate::error::PhaseError;
use crate::experiment::{execute_experiment, replan_experiment};
use crate::gateway::{Gateway, PromptContext, MAX_ATTEMPTS};
use crate::prompts::{json, manifests_block};

/// Longest wait for a fresh deployment to have every pod running.
pub const SETTLE_MAX_S: u64 = 300;

/// Deploys manifest sets onto fresh clusters.
pub trait ClusterProvider {
    type Cluster: ClusterBackend;
    /// Deploys `set` and waits until it is reconciled.
    fn deploy(&mut self, set: &ManifestSet) -> Result<Self::Cluster, ClusterError>;
}

/// Fresh simulator per deployment, all with the same seed and timings.
#[derive(Debug, Clone, Copy)]
pub struct SimProvider {
    pub seed: u64,
    pub config: SimConfig,
    pub deployments: usize,
}

impl SimProvider {
    pub fn new(seed: u64, config: SimConfig) -> Self {
        SimProvider { seed, config, deployments: 0 }
    }
}

impl ClusterProvider for SimProvider {
    type Cluster = SimCluster;

    fn deploy(&mut self, set: &ManifestSet) -> Result<SimCluster, ClusterError> {
        self.deployments += 1;
        let mut cluster = SimCluster::deploy(set, self.seed, self.config);
        cluster.settle(SETTLE_MAX_S)?;
        Ok(cluster)
    }
}

/// Past (result, report, reconfiguration) triples, oldest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImprovementHistory {
    entries: Vec<(ExperimentResult, AnalysisReport, Reconfiguration)>,
}

impl ImprovementHistory {
    pub fn push(&mut self, result: ExperimentResult, report: AnalysisReport, reconf: Reconfiguration) {
        self.entries.push((result, report, reconf));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(ExperimentResult, AnalysisReport, Reconfiguration)] {
        &self.entries
    }

    fn prompt_text(&self) -> String {
        if self.entries.is_empty() {
            return "(none)".into();
        }
        let rows: Vec<serde_json::Value> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, (result, report, reconf))| {
                serde_json::json!({
                    "loop": i + 1,
                    "failed": result.failed_vacs().map(|o| o.name.clone()).collect::<Vec<_>>(),
                    "report": report,
                    "reconfiguration": reconf,
                })
            })
            .collect();
        json(&rows)
    }
}

fn failure_block(failed: &[&ItemOutcome]) -> String {
    failed.iter().map(|o| format!("### {}\n{}", o.name, o.log.trim_end())).collect::<Vec<_>>().join("\n\n")
}

/// Asks for causes and countermeasures of the failed VaC items.
pub fn analyze_failures(set: &ManifestSet, timeline_summary: &str, failed: &[&ItemOutcome], gateway: &Gateway) -> Result<AnalysisReport, PhaseError> {
    assert!(!failed.is_empty(), "analysis needs at least one failed item");
    let prompt: PromptContext = [
        ("manifests".to_string(), manifests_block(set)),
        ("timeline".to_string(), timeline_summary.to_string()),
        ("failed checks".to_string(), failure_block(failed)),
    ]
    .into();
    gateway
        .complete_checked::<AnalysisDraft, _>(Phase::Anlys, &prompt, MAX_ATTEMPTS, |d| {
            if d.causes.is_empty() || d.countermeasures.is_empty() {
                return Err("list at least one cause and one countermeasure".into());
            }
            if let Some(missing) = failed.iter().find(|o| !d.failed_items.contains(&o.name)) {
                return Err(format!("failed item `{}` is not listed", missing.name));
            }
            Ok(AnalysisReport {
                failed_items: d.failed_items,
                causes: d.causes,
                countermeasures: d.countermeasures,
            })
        })?
        .map_err(PhaseError::AnalysisIncompleteExhausted)
}

/// Asks for a reconfiguration that applies cleanly to `set` and differs
/// from every earlier one.
pub fn reconfigure(
    set: &ManifestSet,
    hypothesis: &Hypothesis,
    plan: &ExperimentPlan,
    report: &AnalysisReport,
    history: &ImprovementHistory,
    gateway: &Gateway,
) -> Result<Reconfiguration, PhaseError> {
    let prompt: PromptContext = [
        ("manifests".to_string(), manifests_block(set)),
        ("hypothesis".to_string(), hypothesis.statement.clone()),
        ("plan".to_string(), plan.timeline_summary.clone()),
        ("analysis".to_string(), json(report)),
        ("history".to_string(), history.prompt_text()),
    ]
    .into();
    let mut repeated = None;
    let outcome = gateway.complete_checked::<ReconfigDraft, _>(Phase::Imp, &prompt, MAX_ATTEMPTS, |d| {
        let reconf = Reconfiguration {
            ops: d.ops,
            rationale: d.rationale,
        };
        repeated = history.entries.iter().position(|(_, _, past)| past.ops == reconf.ops);
        if let Some(i) = repeated {
            return Err(format!("identical to the reconfiguration of loop {}", i + 1));
        }
        reconf.validate_paths(set).map_err(|e| e.to_string())?;
        apply_reconfiguration(set, &reconf).map_err(|e| e.to_string())?;
        Ok(reconf)
    })?;
    outcome.map_err(|v| match repeated {
        Some(i) => PhaseError::RepeatedReconfiguration(i + 1),
        None => PhaseError::ReconfigInvalidExhausted(v),
    })
}

pub fn source_files(set: &ManifestSet) -> Vec<SourceFile> {
    set.files()
        .iter()
        .map(|f| SourceFile {
            path: f.path.clone(),
            text: file_text(f),
        })
        .collect()
}

/// Where the loop ended up.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopEnd {
    pub final_set: ManifestSet,
    pub plan: ExperimentPlan,
    pub outcome: CycleOutcome,
}

/// Hooks the pipeline uses to persist each execution as it happens.
pub trait LoopObserver {
    fn executed<C: ClusterBackend>(&mut self, index: usize, record: &LoopRecord, cluster: &C);
    fn improved(&mut self, index: usize, record: &LoopRecord);
}

impl LoopObserver for () {
    fn executed<C: ClusterBackend>(&mut self, _: usize, _: &LoopRecord, _: &C) {}
    fn improved(&mut self, _: usize, _: &LoopRecord) {}
}

/// Runs analyze → reconfigure → apply → redeploy → replan → execute → check
/// until every VaC passes or `max_loops` reconfigurations have been tried.
///
/// `loops` must end with the failed first execution. Each iteration fills in
/// the report and reconfiguration of the last record and appends the next
/// execution, so on error the completed records stay in place.
#[allow(clippy::too_many_arguments)]
pub fn run_improvement_loop<P: ClusterProvider, O: LoopObserver>(
    initial_set: &ManifestSet,
    hypothesis: &Hypothesis,
    initial_plan: &ExperimentPlan,
    provider: &mut P,
    gateway: &Gateway,
    max_loops: u32,
    loops: &mut Vec<LoopRecord>,
    observer: &mut O,
) -> Result<LoopEnd, PhaseError> {
    let mut set = initial_set.clone();
    let mut plan = initial_plan.clone();
    let mut history = ImprovementHistory::default();
    loop {
        let last = loops.last_mut().expect("loop starts after the first execution");
        if check_results(&last.result) {
            let k = history.len() as u32;
            let outcome = if k == 0 {
                CycleOutcome::SatisfiedNoChange
            } else {
                CycleOutcome::SatisfiedAfterImprovement { loops: k }
            };
            return Ok(LoopEnd { final_set: set, plan, outcome });
        }
        if history.len() as u32 >= max_loops {
            return Ok(LoopEnd {
                final_set: set,
                plan,
                outcome: CycleOutcome::Aborted { reason: "max loops".into() },
            });
        }
        let failed: Vec<&ItemOutcome> = last.result.failed_vacs().collect();
        let report = analyze_failures(&set, &plan.timeline_summary, &failed, gateway)?;
        last.report = Some(report.clone());
        let reconf = reconfigure(&set, hypothesis, &plan, &report, &history, gateway)?;
        let applied = apply_reconfiguration(&set, &reconf).map_err(|e| PhaseError::ReconfigInvalidExhausted(e.to_string()))?;
        last.reconfiguration = Some(reconf.clone());
        last.manifest_set_after = source_files(&applied.set);
        history.push(last.result.clone(), report, reconf);
        let index = loops.len() - 1;
        observer.improved(index, &loops[index]);

        let new_set = applied.set;
        let mut cluster = provider.deploy(&new_set).map_err(PhaseError::DeployFailed)?;
        plan = replan_experiment(&plan, &set, &new_set, gateway)?;
        set = new_set;
        let (workflow, result) = execute_experiment(&plan, &mut cluster)?;
        loops.push(LoopRecord {
            plan: plan.clone(),
            workflow,
            result,
            report: None,
            reconfiguration: None,
            manifest_set_after: source_files(&set),
        });
        observer.executed(loops.len() - 1, loops.last().expect("just pushed"), &cluster);
    }
}
