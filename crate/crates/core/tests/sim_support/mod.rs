//! Strategies and checks for the simulator lifecycle properties, shared
//! with the workspace acceptance suite.

#![allow(dead_code)]

use chaos_core::sim::PodPhase;
use chaos_core::{
    run_probe, Aggregation, ClusterBackend, ClusterQuantity, FaultAction, FaultSelector, FaultSpec, HttpQuantity, LabelSelector, ManifestFile,
    ManifestSet, Node, ProbeSpec, ProbeTarget, SelectorMode, SimCluster, SimConfig,
};
use proptest::prelude::*;

pub const HORIZON_S: u64 = 60;

#[derive(Debug, Clone)]
pub enum Res {
    Pod(&'static str),
    Deployment(u32),
    Service(usize),
}

#[derive(Debug, Clone)]
pub struct Injection {
    at_s: u64,
    target: usize,
    action: FaultAction,
    mode: SelectorMode,
    duration_s: u32,
}

fn labels(app: &str) -> Node {
    Node::map().with("app", app.into())
}

fn document(index: usize, res: &Res) -> Node {
    let name = format!("r{index}");
    match res {
        Res::Pod(policy) => Node::map()
            .with("kind", "Pod".into())
            .with("metadata", Node::map().with("name", name.as_str().into()).with("labels", labels(&name)))
            .with("spec", Node::map().with("restartPolicy", (*policy).into())),
        Res::Deployment(replicas) => Node::map()
            .with("kind", "Deployment".into())
            .with("metadata", Node::map().with("name", name.as_str().into()))
            .with(
                "spec",
                Node::map()
                    .with("replicas", i64::from(*replicas).into())
                    .with("template", Node::map().with("metadata", Node::map().with("labels", labels(&name)))),
            ),
        Res::Service(target) => Node::map()
            .with("kind", "Service".into())
            .with("metadata", Node::map().with("name", name.as_str().into()))
            .with(
                "spec",
                Node::map()
                    .with("selector", labels(&format!("r{target}")))
                    .with("ports", Node::Seq(vec![Node::map().with("port", 80i64.into())])),
            ),
    }
}

pub fn manifest_set(resources: &[Res]) -> ManifestSet {
    let files = resources
        .iter()
        .enumerate()
        .map(|(i, r)| ManifestFile::new(format!("r{i}.yml"), "", vec![document(i, r)]).unwrap())
        .collect();
    ManifestSet::new(files).unwrap()
}

fn res_strategy() -> impl Strategy<Value = Res> {
    prop_oneof![
        prop_oneof![Just("Always"), Just("OnFailure"), Just("Never")].prop_map(Res::Pod),
        (1u32..=3).prop_map(Res::Deployment),
        (0usize..5).prop_map(Res::Service),
    ]
}

fn config_strategy() -> impl Strategy<Value = SimConfig> {
    (1u32..=8, 0u32..=4).prop_map(|(restart_delay_s, pod_startup_delay_s)| SimConfig {
        restart_delay_s,
        pod_startup_delay_s,
        ..SimConfig::default()
    })
}

fn action_strategy(kill_only: bool) -> BoxedStrategy<FaultAction> {
    let kill = (0u32..=30).prop_map(|grace_period_s| FaultAction::PodKill { grace_period_s });
    if kill_only {
        return kill.boxed();
    }
    prop_oneof![
        3 => kill,
        1 => Just(FaultAction::PodFailure),
        1 => (1u32..=2000).prop_map(|latency_ms| FaultAction::Delay { latency_ms }),
        1 => (0u32..=100).prop_map(|loss_pct| FaultAction::Loss { loss_pct }),
        1 => (1u32..=8).prop_map(|workers| FaultAction::Cpu { workers }),
    ]
    .boxed()
}

fn injections(kill_only: bool) -> impl Strategy<Value = Vec<Injection>> {
    let mode = prop_oneof![Just(SelectorMode::One), Just(SelectorMode::All), (1u32..=3).prop_map(SelectorMode::FixedCount)];
    proptest::collection::vec(
        (0..HORIZON_S, 0usize..5, action_strategy(kill_only), mode, 1u32..=20).prop_map(|(at_s, target, action, mode, duration_s)| Injection {
            at_s,
            target,
            action,
            mode,
            duration_s,
        }),
        0..6,
    )
}

fn fixture() -> impl Strategy<Value = Vec<Res>> {
    proptest::collection::vec(res_strategy(), 1..=5)
}

fn fault_for(inj: &Injection, n: usize) -> FaultSpec {
    let app = format!("r{}", inj.target % n);
    FaultSpec::new(
        format!("f-{}-{}", inj.at_s, app),
        inj.action.clone(),
        FaultSelector { scope: LabelSelector::new("default", &[("app", &app)]), mode: inj.mode },
    )
    .unwrap()
}

/// Deploys, settles, then plays the injections tick by tick over the horizon,
/// calling `observe` after every tick.
fn play(resources: &[Res], seed: u64, config: SimConfig, plan: &[Injection], mut observe: impl FnMut(&SimCluster, u64)) -> SimCluster {
    let set = manifest_set(resources);
    let mut cluster = SimCluster::deploy(&set, seed, config);
    cluster.settle(30).unwrap();
    let start = cluster.clock_s();
    for t in 0..HORIZON_S {
        for inj in plan.iter().filter(|i| i.at_s == t) {
            // A selector with no live pod is a legitimate rejection here.
            let _ = cluster.inject_fault(&fault_for(inj, resources.len()), inj.duration_s);
        }
        cluster.advance(1);
        observe(&cluster, cluster.clock_s() - start);
    }
    cluster
}

fn running(cluster: &SimCluster, app: &str) -> usize {
    cluster
        .pods()
        .iter()
        .filter(|p| p.phase == PodPhase::Running && p.labels.get("app").map(String::as_str) == Some(app))
        .count()
}

fn oracle_aggregate(values: &[f64], aggregation: Aggregation) -> f64 {
    match aggregation {
        Aggregation::EverySample => values.iter().cloned().reduce(f64::min).unwrap(),
        Aggregation::FinalSample => *values.last().unwrap(),
        Aggregation::P95 => {
            let mut v = values.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let rank = ((0.95 * v.len() as f64) - 1e-9).ceil().max(1.0) as usize;
            v[rank - 1]
        }
    }
}

#[derive(Debug, Clone)]
pub struct Case {
    pub resources: Vec<Res>,
    pub seed: u64,
    pub config: SimConfig,
    pub plan: Vec<Injection>,
}

pub fn case(kill_only: bool) -> impl Strategy<Value = Case> {
    (fixture(), any::<u64>(), config_strategy(), injections(kill_only)).prop_map(|(resources, seed, config, plan)| Case { resources, seed, config, plan })
}

#[derive(Debug, Clone)]
pub struct ProbeCase {
    pub case: Case,
    pub interval: u32,
    pub extra: u32,
    pub users: u32,
    pub http: bool,
    pub latency: bool,
    pub aggregation: Aggregation,
}

pub fn probe_case() -> impl Strategy<Value = ProbeCase> {
    let aggregation = prop_oneof![Just(Aggregation::EverySample), Just(Aggregation::FinalSample), Just(Aggregation::P95)];
    (case(false), 1u32..=5, 0u32..=20, 1u32..=20, any::<bool>(), any::<bool>(), aggregation).prop_map(
        |(case, interval, extra, users, http, latency, aggregation)| ProbeCase { case, interval, extra, users, http, latency, aggregation },
    )
}

/// A Never pod that has failed is never Running again.
pub fn never_pod_stays_down(c: &Case) -> Result<(), TestCaseError> {
    let never: Vec<String> = c
        .resources
        .iter()
        .enumerate()
        .filter(|(_, r)| matches!(r, Res::Pod("Never")))
        .map(|(i, _)| format!("r{i}"))
        .collect();
    let mut killed_at: std::collections::BTreeMap<String, u64> = Default::default();
    let mut violations = Vec::new();
    play(&c.resources, c.seed, c.config, &c.plan, |cluster, t| {
        for app in &never {
            let count = running(cluster, app);
            if let Some(at) = killed_at.get(app) {
                if count != 0 {
                    violations.push(format!("{app} running at {t} after kill at {at}"));
                }
            }
            let down = cluster.pods().iter().any(|p| p.labels.get("app") == Some(app) && p.phase == PodPhase::Failed);
            if down {
                killed_at.entry(app.clone()).or_insert(t);
            }
        }
    });
    prop_assert!(violations.is_empty(), "{violations:?}");
    Ok(())
}

/// Deployments never overshoot and are back at full strength within
/// restart + startup delay of the last kill.
pub fn deployments_reconcile_within_bound(c: &Case) -> Result<(), TestCaseError> {
    let bound = u64::from(c.config.restart_delay_s + c.config.pod_startup_delay_s);
    let last_kill = c.plan.iter().map(|i| i.at_s).max();
    let deployments: Vec<(String, u32)> = c
        .resources
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r {
            Res::Deployment(n) => Some((format!("r{i}"), *n)),
            _ => None,
        })
        .collect();
    let mut violations = Vec::new();
    play(&c.resources, c.seed, c.config, &c.plan, |cluster, t| {
        for (app, desired) in &deployments {
            let live = cluster
                .pods()
                .iter()
                .filter(|p| p.labels.get("app") == Some(app) && matches!(p.phase, PodPhase::Running | PodPhase::Pending))
                .count() as u32;
            if live > *desired {
                violations.push(format!("{app}: {live} live pods exceed {desired} at {t}"));
            }
            let settled = last_kill.is_none_or(|k| t >= k + bound);
            if settled && running(cluster, app) as u32 != *desired {
                violations.push(format!("{app}: {} running != {desired} at {t}", running(cluster, app)));
            }
        }
    });
    prop_assert!(violations.is_empty(), "{violations:?}");
    Ok(())
}

pub fn probe_aggregate_matches_recomputation(p: &ProbeCase) -> Result<(), TestCaseError> {
    let resources = &p.case.resources;
    let mut cluster = play(resources, p.case.seed, SimConfig::default(), &p.case.plan, |_, _| {});
    let service = resources.iter().position(|r| matches!(r, Res::Service(_)));
    let target = match (p.http, service) {
        (true, Some(i)) => ProbeTarget::HttpLoad {
            url: format!("http://r{i}.default.svc.cluster.local:80/"),
            virtual_users: p.users,
            quantity: if p.latency { HttpQuantity::LatencyP95Ms } else { HttpQuantity::SuccessRate },
        },
        _ => ProbeTarget::ClusterApi {
            namespace: "default".into(),
            labels: [("app".to_string(), "r0".to_string())].into(),
            quantity: if p.latency { ClusterQuantity::ReadyReplicaCount } else { ClusterQuantity::PodCount },
        },
    };
    let probe = ProbeSpec::new(target, p.interval, p.interval + p.extra).unwrap();
    let m = run_probe(&mut cluster, &probe, p.aggregation).unwrap();
    let expected_samples = probe.duration_s.div_ceil(p.interval) as usize;
    prop_assert_eq!(m.samples.len(), expected_samples);
    prop_assert!(m.samples.windows(2).all(|w| w[0].offset_s < w[1].offset_s));
    prop_assert_eq!(m.aggregate, oracle_aggregate(&m.values(), p.aggregation));
    prop_assert!(m.validate().is_ok());
    Ok(())
}

pub fn same_seed_same_trajectory(c: &Case) -> Result<(), TestCaseError> {
    let mut trace_a = Vec::new();
    let mut trace_b = Vec::new();
    let a = play(&c.resources, c.seed, c.config, &c.plan, |cl, _| trace_a.push(cl.pods().to_vec()));
    let b = play(&c.resources, c.seed, c.config, &c.plan, |cl, _| trace_b.push(cl.pods().to_vec()));
    prop_assert_eq!(a.events(), b.events());
    prop_assert_eq!(trace_a, trace_b);
    prop_assert_eq!(a.active_faults(), b.active_faults());
    Ok(())
}
