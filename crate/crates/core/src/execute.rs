//! Probe runs and tick-by-tick experiment execution against a cluster backend.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterBackend, ClusterError};
use crate::model::VaCSpec;
use crate::plan::{ScheduledItem, Task};
use crate::probe::{Aggregation, Measurement, ProbeSpec, Quantity, Sample};
use crate::workflow::{Payload, WorkflowManifest, WorkflowUnsound};

/// An in-flight probe: samples every `sample_interval_s` from `start_s` for `duration_s`.
#[derive(Debug, Clone)]
pub struct ProbeRun {
    probe: ProbeSpec,
    start_s: u64,
    duration_s: u32,
    samples: Vec<Sample>,
    log: String,
}

impl ProbeRun {
    pub fn new(probe: ProbeSpec, start_s: u64, duration_s: u32) -> Self {
        ProbeRun {
            probe,
            start_s,
            duration_s,
            samples: Vec::new(),
            log: String::new(),
        }
    }

    pub fn is_due(&self, now: u64) -> bool {
        now >= self.start_s && {
            let offset = now - self.start_s;
            offset < u64::from(self.duration_s) && offset.is_multiple_of(u64::from(self.probe.sample_interval_s))
        }
    }

    pub fn take_sample<C: ClusterBackend>(&mut self, cluster: &mut C) -> Result<(), ClusterError> {
        let now = cluster.clock_s();
        let value = cluster.sample(&self.probe.target)?;
        let offset_s = (now - self.start_s) as u32;
        let _ = writeln!(self.log, "[{offset_s:>3}s] {}", describe(self.probe.quantity(), value));
        self.samples.push(Sample { offset_s, value });
        Ok(())
    }

    pub fn finish(self, aggregation: Aggregation) -> Result<(Measurement, String), ClusterError> {
        let measurement = Measurement::from_samples(self.samples, aggregation)
            .map_err(|e| ClusterError::UnsupportedTarget(format!("probe produced no samples: {e}")))?;
        Ok((measurement, self.log))
    }
}

fn describe(quantity: Quantity, value: f64) -> String {
    match quantity {
        Quantity::PodCount => format!("current pod count: {value}"),
        Quantity::ReadyReplicaCount => format!("current ready replicas: {value}"),
        Quantity::SuccessRate => format!("success rate: {value:.3}"),
        Quantity::LatencyP95Ms => format!("p95 latency: {value} ms"),
    }
}

/// Runs `probe` for its full duration starting now, advancing the cluster.
pub fn run_probe<C: ClusterBackend>(cluster: &mut C, probe: &ProbeSpec, aggregation: Aggregation) -> Result<Measurement, ClusterError> {
    let mut run = ProbeRun::new(probe.clone(), cluster.clock_s(), probe.duration_s);
    let mut elapsed = 0u32;
    while elapsed < probe.duration_s {
        run.take_sample(cluster)?;
        let dt = probe.sample_interval_s.min(probe.duration_s - elapsed);
        cluster.advance(u64::from(dt));
        elapsed += dt;
    }
    Ok(run.finish(aggregation)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    /// Workflow node that realized the item.
    pub name: String,
    pub item: ScheduledItem,
    /// VaC: threshold held. Fault: injection succeeded.
    pub passed: bool,
    pub measurement: Option<Measurement>,
    pub log: String,
}

impl ItemOutcome {
    pub fn is_vac(&self) -> bool {
        matches!(self.item.task, Task::RunVac { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub outcomes: Vec<ItemOutcome>,
    /// Cluster clock at start and end.
    pub started_s: u64,
    pub finished_s: u64,
}

impl ExperimentResult {
    pub fn failed_vacs(&self) -> impl Iterator<Item = &ItemOutcome> {
        self.outcomes.iter().filter(|o| o.is_vac() && !o.passed)
    }
}

/// True iff every VaC outcome passed. Fault outcomes do not count.
pub fn check_results(result: &ExperimentResult) -> bool {
    result.outcomes.iter().filter(|o| o.is_vac()).all(|o| o.passed)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecuteError {
    #[error(transparent)]
    Unsound(#[from] WorkflowUnsound),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

enum Running {
    Vac { index: usize, vac: Box<VaCSpec>, run: ProbeRun },
    Fault,
}

/// Executes a workflow by driving the cluster clock one tick at a time.
///
/// At each tick, items starting at that tick launch first (faults are
/// injected, probes begin), then every due probe samples, then the clock
/// advances. Total simulated time equals the sum of the stage durations.
pub fn execute_workflow<C: ClusterBackend>(workflow: &WorkflowManifest, cluster: &mut C) -> Result<ExperimentResult, ExecuteError> {
    let schedule = workflow.schedule()?;
    let started_s = cluster.clock_s();
    let mut outcomes: Vec<Option<ItemOutcome>> = alloc::vec![None; schedule.leaves.len()];
    let mut running: Vec<Running> = Vec::new();
    let starts: Vec<u64> = schedule
        .leaves
        .iter()
        .map(|l| started_s + u64::from(schedule.stage_start(l.item.stage)) + u64::from(l.item.start_offset_s))
        .collect();
    for tick in 0..u64::from(schedule.total_s()) {
        let now = started_s + tick;
        for (index, leaf) in schedule.leaves.iter().enumerate() {
            if starts[index] != now {
                continue;
            }
            match &leaf.payload {
                Payload::Fault(fault) => {
                    let (passed, log) = match cluster.inject_fault(fault, leaf.item.duration_s) {
                        Ok(()) => (true, format!("injected {} `{}` for {} s", fault.action.subtype(), fault.name, leaf.item.duration_s)),
                        Err(e) => (false, format!("injection of `{}` failed: {e}", fault.name)),
                    };
                    outcomes[index] = Some(ItemOutcome {
                        name: leaf.node.clone(),
                        item: leaf.item.clone(),
                        passed,
                        measurement: None,
                        log,
                    });
                    running.push(Running::Fault);
                }
                Payload::Vac(vac) => running.push(Running::Vac {
                    index,
                    vac: Box::new(vac.clone()),
                    run: ProbeRun::new(vac.probe.clone(), now, leaf.item.duration_s),
                }),
            }
        }
        for entry in &mut running {
            if let Running::Vac { run, .. } = entry {
                if run.is_due(now) {
                    run.take_sample(cluster)?;
                }
            }
        }
        cluster.advance(1);
    }
    for entry in running {
        if let Running::Vac { index, vac, run } = entry {
            let (measurement, mut log) = run.finish(vac.threshold.aggregation)?;
            let passed = vac.threshold.evaluate(&measurement);
            let _ = writeln!(
                log,
                "threshold {} ({}): {}",
                vac.threshold,
                vac.probe.quantity().unit(),
                if passed { "PASSED" } else { "FAILED" }
            );
            let leaf = &schedule.leaves[index];
            outcomes[index] = Some(ItemOutcome {
                name: leaf.node.clone(),
                item: leaf.item.clone(),
                passed,
                measurement: Some(measurement),
                log,
            });
        }
    }
    Ok(ExperimentResult {
        outcomes: outcomes.into_iter().map(|o| o.expect("every leaf starts within its stage")).collect(),
        started_s,
        finished_s: cluster.clock_s(),
    })
}
