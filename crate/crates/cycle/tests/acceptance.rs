//! Acceptance criteria 1-9. Prints one line per criterion and exits
//! non-zero when any fails.

mod common;
#[path = "../../core/tests/sim_support/mod.rs"]
mod sim_support;

use std::ffi::OsString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use chaos_core::ledger::{Phase, Usage};
use chaos_core::{
    compile_workflow, CycleOutcome, CycleRecord, ExperimentPlan, Hypothesis, ManifestSet, ProjectInput, SourceFile, Stage,
    StageDurations, Task, Workload,
};
use chaos_cycle::experiment::{plan_experiment, replan_experiment};
use chaos_cycle::project::{load_project_dir, validate_project_input};
use chaos_cycle::{cli, yaml, PhaseError};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::{json, Value};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

struct CliRun {
    code: i32,
    stdout: String,
    stderr: String,
    elapsed: Duration,
    out: tempfile::TempDir,
}

impl CliRun {
    fn record(&self) -> CycleRecord {
        cli::read_record(&self.out.path().join("record.json")).unwrap()
    }

    fn output_set(&self) -> ManifestSet {
        validate_project_input(&load_project_dir(&self.out.path().join("output")).unwrap()).unwrap()
    }
}

fn cli_args(args: &[&str]) -> (i32, String, String) {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let argv: Vec<OsString> = std::iter::once("chaos-cycle").chain(args.iter().copied()).map(OsString::from).collect();
    let code = cli::run(argv, &mut stdout, &mut stderr);
    (code, String::from_utf8(stdout).unwrap(), String::from_utf8(stderr).unwrap())
}

fn cmd_run(fixture: &str) -> CliRun {
    let dir = common::fixture_dir(fixture);
    let out = tempfile::tempdir().unwrap();
    let input = dir.join("input");
    let config = dir.join("config.toml");
    let started = Instant::now();
    let (code, stdout, stderr) = cli_args(&["run", s(&input), "--config", s(&config), "--out", s(out.path())]);
    CliRun { code, stdout, stderr, elapsed: started.elapsed(), out }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn deployment_replicas(set: &ManifestSet, name: &str) -> Option<u32> {
    set.resources().find_map(|r| match &r.workload {
        Workload::Deployment { replicas, .. } if r.name == name => Some(*replicas),
        _ => None,
    })
}

fn criterion_1() -> Outcome {
    let run = cmd_run("nginx");
    ensure(run.code == 0, format!("exit {} stderr {}", run.code, run.stderr))?;
    let record = run.record();
    ensure(
        record.outcome == CycleOutcome::SatisfiedAfterImprovement { loops: 1 },
        format!("outcome {}", record.outcome),
    )?;
    let set = run.output_set();
    ensure(set.resources().all(|r| r.kind() != "Pod"), "output still has a Pod")?;
    let replicas = deployment_replicas(&set, "nginx").ok_or("no nginx Deployment in output")?;
    ensure(run.elapsed < Duration::from_secs(60), format!("took {:?}", run.elapsed))?;
    Ok(format!("Deployment nginx x{replicas} replaces the Pod; {:?}; {}", run.elapsed, run.stdout.lines().next().unwrap_or("")))
}

fn criterion_2() -> Outcome {
    let input = common::fixture_input("sockshop");
    let initial = validate_project_input(&input).unwrap();
    ensure(initial.files().len() == 6, "fixture must have 6 manifests")?;
    ensure(deployment_replicas(&initial, "front-end") == Some(1), "front-end must start at 1 replica")?;
    let others_two = initial
        .resources()
        .filter(|r| matches!(r.workload, Workload::Deployment { .. }) && r.name != "front-end")
        .all(|r| matches!(r.workload, Workload::Deployment { replicas: 2, .. }));
    ensure(others_two, "other deployments must start at 2 replicas")?;

    let run = cmd_run("sockshop");
    ensure(run.code == 0, format!("exit {} stderr {}", run.code, run.stderr))?;
    let record = run.record();
    ensure(record.outcome.is_satisfied(), format!("outcome {}", record.outcome))?;
    let max_loops = common::fixture_config("sockshop").max_loops as usize;
    ensure(record.reconfigurations() <= max_loops, "too many loops")?;
    let after = deployment_replicas(&run.output_set(), "front-end").ok_or("front-end missing from output")?;
    ensure(after > 1, format!("front-end replicas {after}"))?;
    ensure(run.elapsed < Duration::from_secs(120), format!("took {:?}", run.elapsed))?;
    Ok(format!("{}; front-end replicas 1 -> {after}; {:?}", record.outcome, run.elapsed))
}

fn criterion_3() -> Outcome {
    let run = cmd_run("nginx-resilient");
    ensure(run.code == 0, format!("exit {} stderr {}", run.code, run.stderr))?;
    let record = run.record();
    ensure(record.outcome == CycleOutcome::SatisfiedNoChange, format!("outcome {}", record.outcome))?;
    ensure(record.loops.len() == 1 && record.loops[0].passed(), "first experiment must pass")?;
    ensure(record.reconfigurations() == 0, "no reconfiguration expected")?;
    ensure(run.output_set().structurally_eq(&validate_project_input(&common::fixture_input("nginx-resilient")).unwrap()), "output changed")?;
    Ok("first run passes, zero reconfigurations".into())
}

fn criterion_4() -> Outcome {
    let a = cmd_run("nginx");
    let b = cmd_run("nginx");
    let bytes = |r: &CliRun| serde_json::to_vec_pretty(&r.record().masked()).unwrap();
    let (ja, jb) = (bytes(&a), bytes(&b));
    ensure(ja == jb, "masked records differ")?;
    let events = |r: &CliRun| std::fs::read(r.out.path().join("loop-0/events.jsonl")).unwrap();
    ensure(events(&a) == events(&b), "event logs differ")?;
    Ok(format!("masked record.json identical ({} bytes)", ja.len()))
}

fn text<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let runner = || TestRunner::new(Config { cases: 250, failure_persistence: None, ..Config::default() });
    let mut total = 0;
    let mut check = |name: &str, result: Result<(), String>| -> Result<(), String> {
        total += 250;
        result.map_err(|e| format!("{name}: {e}"))
    };
    check("never monotonic", text(runner().run(&sim_support::case(false), |c| sim_support::never_pod_stays_down(&c))))?;
    check("reconcile bound", text(runner().run(&sim_support::case(true), |c| sim_support::deployments_reconcile_within_bound(&c))))?;
    check("probe aggregate", text(runner().run(&sim_support::probe_case(), |p| sim_support::probe_aggregate_matches_recomputation(&p))))?;
    check("seed determinism", text(runner().run(&sim_support::case(false), |c| sim_support::same_seed_same_trajectory(&c))))?;
    let elapsed = started.elapsed();
    ensure(total >= 1000, "fewer than 1000 cases")?;
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("{total} cases in {elapsed:?}"))
}

// ---- criterion 6

#[derive(Debug, Clone)]
struct ItemsAttempt {
    rolls: Vec<u32>,
    corruption: u8,
    fault_stage_vac: bool,
}

#[derive(Debug, Clone)]
struct PlanCase {
    states: usize,
    faults: usize,
    limit: Option<u32>,
    stages: Vec<(u32, u32, u32)>,
    items: Vec<ItemsAttempt>,
}

fn plan_case() -> impl Strategy<Value = PlanCase> {
    let limit = prop_oneof![Just(None), Just(Some(60u32)), (20u32..=60).prop_map(Some)];
    let stage = (1u32..=40, 1u32..=40, 1u32..=40);
    let items = (prop::collection::vec(any::<u32>(), 16), 0u8..8, any::<bool>())
        .prop_map(|(rolls, corruption, fault_stage_vac)| ItemsAttempt { rolls, corruption, fault_stage_vac });
    (1usize..=3, 1usize..=3, limit, prop::collection::vec(stage, 3), prop::collection::vec(items, 3))
        .prop_map(|(states, faults, limit, stages, items)| PlanCase { states, faults, limit, stages, items })
}

fn hypothesis_for(case: &PlanCase, base: &Hypothesis, fault_pool: &[chaos_core::FaultSpec]) -> Hypothesis {
    let template = &base.steady_states[0];
    let states = (0..case.states)
        .map(|i| {
            let mut st = template.clone();
            st.name = format!("state-{i}");
            st.vac.steady_state_name = st.name.clone();
            st
        })
        .collect();
    let faults = (0..case.faults)
        .map(|j| {
            let mut f = fault_pool[j % fault_pool.len()].clone();
            f.name = format!("fault-{j}");
            f
        })
        .collect();
    Hypothesis::new(states, chaos_core::FailureScenario::new("random scenario", faults).unwrap()).unwrap()
}

fn item(stage: Stage, task: Task, len: u32, a: u32, b: u32) -> chaos_core::ScheduledItem {
    let offset = a % len;
    chaos_core::ScheduledItem {
        stage,
        task,
        start_offset_s: offset,
        duration_s: 1 + b % (len - offset),
    }
}

fn build_items(hyp: &Hypothesis, stages: StageDurations, attempt: &ItemsAttempt) -> Vec<chaos_core::ScheduledItem> {
    let mut rolls = attempt.rolls.iter().copied().cycle();
    let mut roll = || rolls.next().unwrap();
    let mut items = Vec::new();
    for st in &hyp.steady_states {
        let vac = || Task::RunVac { steady_state: st.name.clone() };
        items.push(item(Stage::Pre, vac(), stages.pre_s, roll(), roll()));
        if attempt.fault_stage_vac {
            items.push(item(Stage::Fault, vac(), stages.fault_s, roll(), roll()));
        }
        items.push(item(Stage::Post, vac(), stages.post_s, roll(), roll()));
    }
    for f in &hyp.scenario.faults {
        items.push(item(Stage::Fault, Task::InjectFault { fault: f.name.clone() }, stages.fault_s, roll(), roll()));
    }
    let fault0 = Task::InjectFault { fault: hyp.scenario.faults[0].name.clone() };
    match attempt.corruption {
        0 => items.retain(|i| !(i.stage == Stage::Post && i.task == Task::RunVac { steady_state: "state-0".into() })),
        1 => items.push(item(Stage::Fault, fault0, stages.fault_s, roll(), roll())),
        2 => items.push(item(Stage::Pre, fault0, stages.pre_s, roll(), roll())),
        3 => items[0].duration_s = stages.pre_s - items[0].start_offset_s + 1,
        4 => items.push(item(Stage::Post, Task::RunVac { steady_state: "ghost".into() }, stages.post_s, roll(), roll())),
        _ => {}
    }
    items
}

fn stage_ok(s: StageDurations, limit: Option<u32>) -> bool {
    s.pre_s > 0 && s.fault_s > 0 && s.post_s > 0 && limit.is_none_or(|l| s.pre_s + s.fault_s + s.post_s <= l)
}

/// Plan invariants, checked from their definitions rather than through the library.
fn oracle_plan_ok(plan: &ExperimentPlan, hyp: &Hypothesis, limit: Option<u32>) -> bool {
    let s = plan.stage_durations;
    if !stage_ok(s, limit) || plan.vacs != hyp.vacs() || plan.faults != hyp.scenario.faults {
        return false;
    }
    let len = |st: Stage| match st {
        Stage::Pre => s.pre_s,
        Stage::Fault => s.fault_s,
        Stage::Post => s.post_s,
    };
    for i in &plan.items {
        if i.duration_s == 0 || i.start_offset_s + i.duration_s > len(i.stage) {
            return false;
        }
        match &i.task {
            Task::RunVac { steady_state } if !hyp.steady_states.iter().any(|s| &s.name == steady_state) => return false,
            Task::InjectFault { fault } if i.stage != Stage::Fault || !hyp.scenario.faults.iter().any(|f| &f.name == fault) => return false,
            _ => {}
        }
    }
    let count = |pred: &dyn Fn(&chaos_core::ScheduledItem) -> bool| plan.items.iter().filter(|i| pred(i)).count();
    hyp.steady_states.iter().all(|st| {
        let is = |stage: Stage| move |i: &chaos_core::ScheduledItem| i.stage == stage && i.task == Task::RunVac { steady_state: st.name.clone() };
        count(&is(Stage::Pre)) >= 1 && count(&is(Stage::Post)) >= 1
    }) && hyp
        .scenario
        .faults
        .iter()
        .all(|f| count(&|i| i.task == Task::InjectFault { fault: f.name.clone() }) == 1)
}

fn schema_validator() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/workflow.schema.json");
    jsonschema::validator_for(&serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap()
}

fn criterion_6() -> Outcome {
    let nginx = common::run_fixture("nginx").record;
    let sockshop = common::run_fixture("sockshop").record;
    let ctx = nginx.context.clone().unwrap();
    let base = nginx.hypothesis.clone().unwrap();
    let mut pool = base.scenario.faults.clone();
    pool.extend(sockshop.hypothesis.clone().unwrap().scenario.faults);
    let validator = schema_validator();

    let mut runner = TestRunner::new(Config { cases: 100, failure_persistence: None, ..Config::default() });
    let emitted = std::cell::Cell::new(0);
    runner
        .run(&plan_case(), |case| {
            let hyp = hypothesis_for(&case, &base, &pool);
            let stage_drafts: Vec<StageDurations> = case.stages.iter().map(|&(pre_s, fault_s, post_s)| StageDurations { pre_s, fault_s, post_s }).collect();
            let chosen = stage_drafts.iter().copied().find(|s| stage_ok(*s, case.limit));
            let items_drafts: Vec<_> = match chosen {
                Some(st) => case.items.iter().map(|a| build_items(&hyp, st, a)).collect(),
                None => Vec::new(),
            };
            let expected_items = chosen.and_then(|st| {
                items_drafts.iter().find(|items| {
                    let plan = ExperimentPlan {
                        stage_durations: st,
                        items: (*items).clone(),
                        timeline_summary: String::new(),
                        vacs: hyp.vacs(),
                        faults: hyp.scenario.faults.clone(),
                    };
                    oracle_plan_ok(&plan, &hyp, case.limit)
                })
            });
            let gw = common::scripted(json!({
                "StagePlanner": stage_drafts,
                "ItemScheduler": items_drafts.iter().map(|items| json!({"items": items})).collect::<Vec<_>>(),
                "TimelineWriter": [{"summary": "randomized timeline"}],
            }));
            match (plan_experiment(&ctx, &hyp, case.limit, &gw), expected_items) {
                (Ok(plan), Some(items)) => {
                    prop_assert_eq!(&plan.items, items);
                    prop_assert!(oracle_plan_ok(&plan, &hyp, case.limit));
                    prop_assert!(plan.validate_against(&hyp, case.limit).is_ok());
                    if case.limit.is_some() {
                        prop_assert!(plan.stage_durations.total() <= 60);
                    }
                    let workflow = compile_workflow(&plan);
                    prop_assert!(workflow.validate().is_ok());
                    let doc = workflow.to_document();
                    let errors: Vec<String> = validator.iter_errors(&serde_json::to_value(&doc).unwrap()).map(|e| e.to_string()).collect();
                    prop_assert!(errors.is_empty(), "{:?}", errors);
                    let reparsed: ExperimentPlan = serde_json::from_str(&serde_json::to_string(&plan).unwrap()).unwrap();
                    prop_assert_eq!(yaml::to_yaml(&doc), yaml::to_yaml(&compile_workflow(&reparsed).to_document()));
                    emitted.set(emitted.get() + 1);
                }
                (Err(PhaseError::PlanInvalidExhausted(_)), None) => {}
                (got, want) => prop_assert!(false, "got {:?}, expected items {:?}", got.map(|p| p.items), want),
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/nginx-workflow.yaml");
    let nginx_yaml = yaml::to_yaml(&compile_workflow(&nginx.loops[0].plan).to_document());
    ensure(std::fs::read_to_string(golden).unwrap() == nginx_yaml, "nginx workflow differs from golden file")?;
    ensure(emitted.get() > 0, "no plan was emitted")?;
    Ok(format!("100 hypotheses, {} plans emitted and valid, golden workflow stable", emitted.get()))
}

// ---- criterion 7

fn leaf_diffs(a: &Value, b: &Value, path: String, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for k in x.keys().chain(y.keys().filter(|k| !x.contains_key(*k))) {
                leaf_diffs(x.get(k).unwrap_or(&Value::Null), y.get(k).unwrap_or(&Value::Null), format!("{path}/{k}"), out);
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                leaf_diffs(p, q, format!("{path}/{i}"), out);
            }
        }
        _ if a != b => out.push(path),
        _ => {}
    }
}

fn renamed_set(files: &[SourceFile], template: &ProjectInput, key: &str, value: &str) -> ManifestSet {
    let manifests = files
        .iter()
        .map(|f| SourceFile { path: f.path.clone(), text: f.text.replace("app: nginx", &format!("{key}: {value}")) })
        .collect::<Vec<_>>();
    let list: String = manifests.iter().map(|f| format!("  - {}\n", f.path)).collect();
    validate_project_input(&ProjectInput {
        manifests,
        deploy_config: format!("apiVersion: skaffold/v4beta6\nkind: Config\nmanifests:\n  rawYaml:\n{list}"),
        ..template.clone()
    })
    .unwrap()
}

fn criterion_7() -> Outcome {
    let record = common::run_fixture("nginx").record;
    let allowed = regex::Regex::new(r"^/(vacs/\d+/probe/target|faults/\d+/selector)(/|$)").unwrap();
    let cases = (0usize..2, "[a-z]{1,6}", "v-[a-z0-9]{1,8}", any::<bool>());
    let mut runner = TestRunner::new(Config { cases: 50, failure_persistence: None, ..Config::default() });
    runner
        .run(&cases, |(which, key, value, bad_first)| {
            // Either the original Pod set with the first plan, or the fixed Deployment set with the replanned one.
            let (files, plan) = if which == 0 {
                (record.input.manifests.clone(), record.loops[0].plan.clone())
            } else {
                (record.loops[0].manifest_set_after.clone(), record.loops[1].plan.clone())
            };
            let old = renamed_set(&files, &record.input, "app", "nginx");
            let new = renamed_set(&files, &record.input, &key, &value);
            let mut good = serde_json::to_value(&plan).unwrap();
            for vac in good["vacs"].as_array_mut().unwrap() {
                if vac["probe"]["target"]["tool"] == "cluster_api" {
                    vac["probe"]["target"]["labels"] = json!({ key.clone(): value.clone() });
                }
            }
            for fault in good["faults"].as_array_mut().unwrap() {
                fault["selector"]["labels"] = json!({ key.clone(): value.clone() });
            }
            let mut outputs = Vec::new();
            if bad_first {
                let mut bad = good.clone();
                bad["faults"][0]["selector"]["mode"] = json!("all");
                outputs.push(json!({"vacs": bad["vacs"], "faults": bad["faults"]}));
            }
            outputs.push(json!({"vacs": good["vacs"], "faults": good["faults"]}));
            let gw = common::scripted(json!({ "Replanner": outputs }));
            let replanned = replan_experiment(&plan, &old, &new, &gw).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let mut diffs = Vec::new();
            leaf_diffs(&serde_json::to_value(&plan).unwrap(), &serde_json::to_value(&replanned).unwrap(), String::new(), &mut diffs);
            prop_assert!(!diffs.is_empty());
            let outside: Vec<&String> = diffs.iter().filter(|d| !allowed.is_match(d)).collect();
            prop_assert!(outside.is_empty(), "fields outside targets and selectors changed: {:?}", outside);
            prop_assert!(replanned.validate_targets(&new).is_ok());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("50 label renames; only probe targets and fault selectors changed".into())
}

// ---- criterion 8

fn criterion_8() -> Outcome {
    let mut checked = Vec::new();
    for name in common::FIXTURES {
        let run = common::run_fixture(name);
        let record = &run.record;
        let mut total = Usage::default();
        for phase in Phase::ALL {
            let calls: Vec<_> = record.calls.iter().filter(|c| c.phase == phase).collect();
            let tokens_in: u64 = calls.iter().map(|c| c.usage.input_tokens).sum();
            let tokens_out: u64 = calls.iter().map(|c| c.usage.output_tokens).sum();
            let cost: f64 = calls.iter().map(|c| c.usage.cost_usd).sum();
            let time: f64 = calls.iter().map(|c| c.usage.wall_time_s).sum();
            let row = record.ledger.row(phase);
            ensure(row.input_tokens == tokens_in && row.output_tokens == tokens_out, format!("{name} {phase:?}: token mismatch"))?;
            ensure((row.cost_usd - cost).abs() < 1e-9 && (row.wall_time_s - time).abs() < 1e-9, format!("{name} {phase:?}: cost/time mismatch"))?;
            // Prices from the config, applied independently per call.
            let prices = common::fixture_config(name).prices();
            let repriced: f64 = calls
                .iter()
                .map(|c| c.usage.input_tokens as f64 * prices.price_in / 1e6 + c.usage.output_tokens as f64 * prices.price_out / 1e6)
                .sum();
            ensure((row.cost_usd - repriced).abs() < 1e-9, format!("{name} {phase:?}: pricing mismatch"))?;
            total.input_tokens += tokens_in;
            total.output_tokens += tokens_out;
            total.cost_usd += cost;
        }
        let ledger_total = record.ledger.total();
        ensure(
            ledger_total.input_tokens == total.input_tokens && ledger_total.output_tokens == total.output_tokens,
            format!("{name}: total tokens mismatch"),
        )?;
        ensure((ledger_total.cost_usd - total.cost_usd).abs() < 1e-9, format!("{name}: total cost mismatch"))?;

        let (code, table, stderr) = cli_args(&["report", s(&run.out.path().join("record.json"))]);
        ensure(code == 0, format!("{name}: report failed: {stderr}"))?;
        let header = table.lines().next().unwrap_or("");
        let columns: Vec<&str> = header.split_whitespace().collect();
        let phases = ["Pre", "Hyp.", "Expt.", "Anlys.", "Imp.", "Post"];
        ensure(phases.iter().all(|p| columns.contains(p)), format!("{name}: header {header:?}"))?;
        for label in ["Input tokens", "Output tokens", "API cost ($)", "Time"] {
            ensure(table.lines().any(|l| l.trim_start().starts_with(label)), format!("{name}: missing row {label}"))?;
        }
        checked.push(format!("{name} {} calls", record.calls.len()));
    }
    Ok(checked.join(", "))
}

fn criterion_9() -> Outcome {
    let run = common::run_fixture("futile");
    let max_loops = common::fixture_config("futile").max_loops as usize;
    let record = &run.record;
    ensure(record.outcome == CycleOutcome::Aborted { reason: "max loops".into() }, format!("outcome {}", record.outcome))?;
    ensure(record.reconfigurations() == max_loops, format!("{} reconfigurations", record.reconfigurations()))?;
    ensure(record.experiment_runs() == 1 + max_loops, format!("{} executions", record.experiment_runs()))?;
    ensure(run.deployments == 1 + max_loops, format!("{} deployments", run.deployments))?;
    ensure(!record.final_set_validated, "final set must be unvalidated")?;
    Ok(format!("aborted after {max_loops} loops and {} executions", record.experiment_runs()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("nginx end to end", criterion_1),
        ("sockshop end to end", criterion_2),
        ("already resilient", criterion_3),
        ("determinism", criterion_4),
        ("simulator properties", criterion_5),
        ("plan validator", criterion_6),
        ("replan conservatism", criterion_7),
        ("ledger integrity", criterion_8),
        ("loop bound and abort", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
