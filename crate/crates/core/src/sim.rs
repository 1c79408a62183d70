//! Deterministic discrete-event Kubernetes cluster simulator.
//!
//! Time advances in whole-second ticks. Each tick expires faults, promotes
//! pending pods whose startup delay elapsed, restarts standalone pods per
//! their `restartPolicy`, and lets deployments replace failed pods. All
//! randomness (fault target choice, request routing, packet loss) comes
//! from a seeded ChaCha stream, so a `(manifests, seed, call sequence)`
//! triple always yields the same trajectory.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterBackend, ClusterError, ClusterEvent, EventKind};
use crate::fault::{FaultAction, FaultSpec, SelectorMode};
use crate::manifest::{labels_match, Labels, ManifestSet, RestartPolicy, Workload};
use crate::probe::{parse_service_url, percentile_95, ClusterQuantity, HttpQuantity, ProbeTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub restart_delay_s: u32,
    pub pod_startup_delay_s: u32,
    pub base_latency_ms: u32,
    /// Latency multiplier for pods under CPU stress.
    pub stress_latency_factor: u32,
    /// Latency recorded for a request that is dropped or has no backend.
    pub request_timeout_ms: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            restart_delay_s: 5,
            pod_startup_delay_s: 2,
            base_latency_ms: 50,
            stress_latency_factor: 4,
            request_timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PodPhase {
    Pending,
    Running,
    Failed,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimPod {
    pub id: String,
    pub namespace: String,
    pub labels: Labels,
    pub phase: PodPhase,
    /// Owning deployment id, for replica-managed pods.
    pub owner: Option<String>,
    pub restart_policy: RestartPolicy,
    pub pending_until_s: u64,
    pub failed_at_s: Option<u64>,
    /// Set while a pod-failure fault holds the pod down.
    pub held_until_s: Option<u64>,
    pub restarts: u32,
}

impl SimPod {
    fn is_live(&self) -> bool {
        matches!(self.phase, PodPhase::Running | PodPhase::Pending)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimDeployment {
    pub id: String,
    pub namespace: String,
    pub desired_replicas: u32,
    pub template_labels: Labels,
    next_ordinal: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimService {
    pub namespace: String,
    pub name: String,
    pub selector: Labels,
    pub port: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveFault {
    pub fault: FaultSpec,
    pub started_s: u64,
    pub end_s: u64,
    pub pods: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SimCluster {
    clock_s: u64,
    pods: Vec<SimPod>,
    deployments: Vec<SimDeployment>,
    services: Vec<SimService>,
    active_faults: Vec<ActiveFault>,
    rng_seed: u64,
    rng: ChaCha8Rng,
    config: SimConfig,
    events: Vec<ClusterEvent>,
}

fn detail(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| ((*k).to_string(), v.clone())).collect()
}

impl SimCluster {
    /// Deploys every Pod, Deployment, and Service of `set` at clock 0.
    /// Pods start `Pending` and run after the startup delay.
    pub fn deploy(set: &ManifestSet, seed: u64, config: SimConfig) -> Self {
        let mut cluster = SimCluster {
            clock_s: 0,
            pods: Vec::new(),
            deployments: Vec::new(),
            services: Vec::new(),
            active_faults: Vec::new(),
            rng_seed: seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            config,
            events: Vec::new(),
        };
        for resource in set.resources() {
            match &resource.workload {
                Workload::Pod { restart_policy } => {
                    let id = format!("{}/{}", resource.namespace, resource.name);
                    cluster.schedule_pod(id, &resource.namespace, resource.labels.clone(), None, *restart_policy);
                }
                Workload::Deployment {
                    replicas,
                    pod_template_labels,
                } => {
                    let id = format!("{}/{}", resource.namespace, resource.name);
                    cluster.deployments.push(SimDeployment {
                        id: id.clone(),
                        namespace: resource.namespace.clone(),
                        desired_replicas: *replicas,
                        template_labels: pod_template_labels.clone(),
                        next_ordinal: 0,
                    });
                    for _ in 0..*replicas {
                        cluster.spawn_replica(cluster.deployments.len() - 1);
                    }
                }
                Workload::Service { selector, port } => cluster.services.push(SimService {
                    namespace: resource.namespace.clone(),
                    name: resource.name.clone(),
                    selector: selector.clone(),
                    port: *port,
                }),
                Workload::Other { .. } => {}
            }
        }
        for service in cluster.services.clone() {
            let satisfiable = set.resources().any(|r| {
                r.namespace == service.namespace
                    && r.pod_labels().is_some_and(|labels| labels_match(&service.selector, labels))
            });
            if !satisfiable {
                cluster.emit(
                    EventKind::Warning,
                    detail(&[
                        ("warning", "UnsatisfiableService".into()),
                        ("service", format!("{}/{}", service.namespace, service.name)),
                    ]),
                );
            }
        }
        cluster
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn pods(&self) -> &[SimPod] {
        &self.pods
    }

    pub fn deployments(&self) -> &[SimDeployment] {
        &self.deployments
    }

    pub fn services(&self) -> &[SimService] {
        &self.services
    }

    pub fn active_faults(&self) -> &[ActiveFault] {
        &self.active_faults
    }

    /// Every event emitted since deployment, in clock order.
    pub fn events(&self) -> &[ClusterEvent] {
        &self.events
    }

    pub fn all_running(&self) -> bool {
        self.pods.iter().all(|p| p.phase == PodPhase::Running)
    }

    /// Advances until no pod is pending or failed, at most `max_s` seconds.
    pub fn settle(&mut self, max_s: u64) -> Result<u64, ClusterError> {
        let start = self.clock_s;
        while !self.all_running() {
            if self.clock_s - start >= max_s {
                return Err(ClusterError::NotSettled(max_s));
            }
            self.tick();
        }
        Ok(self.clock_s - start)
    }

    /// Advances `dt_s` one-second ticks and returns the events they emitted.
    pub fn step(&mut self, dt_s: u64) -> Vec<ClusterEvent> {
        let first = self.events.len();
        for _ in 0..dt_s {
            self.tick();
        }
        self.events[first..].to_vec()
    }

    fn emit(&mut self, kind: EventKind, detail: BTreeMap<String, String>) {
        self.events.push(ClusterEvent {
            at_s: self.clock_s,
            kind,
            detail,
        });
    }

    fn schedule_pod(&mut self, id: String, namespace: &str, labels: Labels, owner: Option<String>, policy: RestartPolicy) {
        let ready_at = self.clock_s + u64::from(self.config.pod_startup_delay_s);
        let phase = if ready_at <= self.clock_s {
            PodPhase::Running
        } else {
            PodPhase::Pending
        };
        self.emit(
            EventKind::PodScheduled,
            detail(&[("pod", id.clone()), ("ready_at_s", ready_at.to_string())]),
        );
        self.pods.push(SimPod {
            id,
            namespace: namespace.into(),
            labels,
            phase,
            owner,
            restart_policy: policy,
            pending_until_s: ready_at,
            failed_at_s: None,
            held_until_s: None,
            restarts: 0,
        });
    }

    fn spawn_replica(&mut self, deployment: usize) {
        let dep = &mut self.deployments[deployment];
        let id = format!("{}-{}", dep.id, dep.next_ordinal);
        dep.next_ordinal += 1;
        let (ns, labels, owner) = (dep.namespace.clone(), dep.template_labels.clone(), dep.id.clone());
        self.schedule_pod(id, &ns, labels, Some(owner), RestartPolicy::Always);
    }

    fn tick(&mut self) {
        self.clock_s += 1;
        let now = self.clock_s;

        let (expired, active): (Vec<_>, Vec<_>) = core::mem::take(&mut self.active_faults)
            .into_iter()
            .partition(|f| f.end_s <= now);
        self.active_faults = active;
        for fault in expired {
            if fault.fault.action == FaultAction::PodFailure {
                for pod in self.pods.iter_mut().filter(|p| fault.pods.contains(&p.id)) {
                    pod.held_until_s = None;
                }
            }
            self.emit(
                EventKind::FaultEnded,
                detail(&[("fault", fault.fault.name.clone())]),
            );
        }

        for pod in &mut self.pods {
            if pod.phase == PodPhase::Pending && pod.pending_until_s <= now {
                pod.phase = PodPhase::Running;
            }
        }

        let restart_delay = u64::from(self.config.restart_delay_s);
        let due = |p: &SimPod| {
            p.phase == PodPhase::Failed
                && p.held_until_s.is_none()
                && p.failed_at_s.is_some_and(|t| t + restart_delay <= now)
        };

        let mut restarted = Vec::new();
        for pod in self.pods.iter_mut().filter(|p| p.owner.is_none()) {
            if due(pod) && pod.restart_policy != RestartPolicy::Never {
                pod.phase = PodPhase::Running;
                pod.failed_at_s = None;
                pod.restarts += 1;
                restarted.push(pod.id.clone());
            }
        }
        for id in restarted {
            self.emit(EventKind::PodRestarted, detail(&[("pod", id)]));
        }

        let mut replaced = Vec::new();
        for (i, pod) in self.pods.iter_mut().enumerate() {
            if pod.owner.is_some() && due(pod) {
                pod.phase = PodPhase::Terminated;
                replaced.push(i);
            }
        }
        for i in replaced {
            let owner = self.pods[i].owner.clone().expect("owned pod");
            if let Some(dep) = self.deployments.iter().position(|d| d.id == owner) {
                self.spawn_replica(dep);
            }
        }
        self.pods.retain(|p| p.phase != PodPhase::Terminated);
    }

    fn pods_for(&self, namespace: &str, selector: &Labels) -> Vec<usize> {
        self.pods
            .iter()
            .enumerate()
            .filter(|(_, p)| p.namespace == namespace && labels_match(selector, &p.labels))
            .map(|(i, _)| i)
            .collect()
    }

    fn modifiers(&self, pod_id: &str) -> (bool, u32, u32) {
        let mut stressed = false;
        let mut delay = 0u32;
        let mut loss = 0u32;
        for fault in self.active_faults.iter().filter(|f| f.pods.iter().any(|p| p == pod_id)) {
            match fault.fault.action {
                FaultAction::Cpu { .. } => stressed = true,
                FaultAction::Delay { latency_ms } => delay = delay.saturating_add(latency_ms),
                FaultAction::Loss { loss_pct } => loss = loss.max(loss_pct),
                _ => {}
            }
        }
        (stressed, delay, loss)
    }

    fn http_sample(&mut self, url: &str, users: u32, quantity: HttpQuantity) -> Result<f64, ClusterError> {
        let (namespace, name) =
            parse_service_url(url).ok_or_else(|| ClusterError::UnsupportedTarget(url.into()))?;
        let service = self
            .services
            .iter()
            .find(|s| s.namespace == namespace && s.name == name)
            .cloned()
            .ok_or(ClusterError::UnknownService { namespace, name })?;
        let backends: Vec<String> = self
            .pods_for(&service.namespace, &service.selector)
            .into_iter()
            .filter(|&i| self.pods[i].phase == PodPhase::Running)
            .map(|i| self.pods[i].id.clone())
            .collect();
        let timeout = f64::from(self.config.request_timeout_ms);
        let mut served = 0u32;
        let mut latencies = Vec::with_capacity(users as usize);
        for _ in 0..users {
            if backends.is_empty() {
                latencies.push(timeout);
                continue;
            }
            let pod = &backends[self.rng.random_range(0..backends.len())];
            let (stressed, delay, loss) = self.modifiers(pod);
            if loss > 0 && self.rng.random_range(0..100u32) < loss {
                latencies.push(timeout);
                continue;
            }
            let factor = if stressed { self.config.stress_latency_factor } else { 1 };
            let latency = u64::from(self.config.base_latency_ms) * u64::from(factor) + u64::from(delay);
            latencies.push(latency as f64);
            served += 1;
        }
        Ok(match quantity {
            HttpQuantity::SuccessRate => f64::from(served) / f64::from(users.max(1)),
            HttpQuantity::LatencyP95Ms => {
                if latencies.is_empty() {
                    timeout
                } else {
                    percentile_95(&latencies)
                }
            }
        })
    }
}

impl ClusterBackend for SimCluster {
    fn clock_s(&self) -> u64 {
        self.clock_s
    }

    fn advance(&mut self, dt_s: u64) -> Vec<ClusterEvent> {
        self.step(dt_s)
    }

    fn event_log(&self) -> &[ClusterEvent] {
        &self.events
    }

    fn inject_fault(&mut self, fault: &FaultSpec, duration_s: u32) -> Result<(), ClusterError> {
        let scope = &fault.selector.scope;
        let candidates: Vec<usize> = self
            .pods_for(&scope.namespace, &scope.labels)
            .into_iter()
            .filter(|&i| self.pods[i].is_live())
            .collect();
        if candidates.is_empty() || scope.labels.is_empty() {
            return Err(ClusterError::SelectorMatchesNothing(scope.to_string()));
        }
        let mut chosen: Vec<usize> = match fault.selector.mode {
            SelectorMode::All => candidates,
            SelectorMode::One => vec![candidates[self.rng.random_range(0..candidates.len())]],
            SelectorMode::FixedCount(n) => {
                let k = (n as usize).min(candidates.len());
                rand::seq::index::sample(&mut self.rng, candidates.len(), k)
                    .into_iter()
                    .map(|i| candidates[i])
                    .collect()
            }
        };
        chosen.sort_unstable();
        let now = self.clock_s;
        let end_s = now + u64::from(duration_s);
        let ids: Vec<String> = chosen.iter().map(|&i| self.pods[i].id.clone()).collect();
        self.emit(
            EventKind::FaultStarted,
            detail(&[
                ("fault", fault.name.clone()),
                ("subtype", fault.action.subtype().into()),
                ("pods", ids.join(",")),
                ("end_s", end_s.to_string()),
            ]),
        );
        if matches!(fault.action, FaultAction::PodKill { .. } | FaultAction::PodFailure) {
            let held = fault.action == FaultAction::PodFailure;
            for &i in &chosen {
                let pod = &mut self.pods[i];
                pod.phase = PodPhase::Failed;
                pod.failed_at_s = Some(now);
                pod.held_until_s = held.then_some(end_s);
            }
            for id in &ids {
                self.emit(
                    EventKind::PodKilled,
                    detail(&[("pod", id.clone()), ("action", fault.action.subtype().into())]),
                );
            }
        }
        self.active_faults.push(ActiveFault {
            fault: fault.clone(),
            started_s: now,
            end_s,
            pods: ids,
        });
        Ok(())
    }

    fn sample(&mut self, target: &ProbeTarget) -> Result<f64, ClusterError> {
        let value = match target {
            ProbeTarget::ClusterApi {
                namespace,
                labels,
                quantity,
            } => self
                .pods_for(namespace, labels)
                .into_iter()
                .map(|i| &self.pods[i])
                .filter(|p| p.phase == PodPhase::Running)
                .filter(|p| *quantity == ClusterQuantity::PodCount || p.owner.is_some())
                .count() as f64,
            ProbeTarget::HttpLoad {
                url,
                virtual_users,
                quantity,
            } => self.http_sample(url, *virtual_users, *quantity)?,
        };
        self.emit(
            EventKind::ProbeSample,
            detail(&[("tool", target.tool_name().into()), ("value", value.to_string())]),
        );
        Ok(value)
    }
}
