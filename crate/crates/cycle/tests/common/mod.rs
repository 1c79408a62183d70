#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chaos_core::{CycleRecord, ManifestSet, ProjectInput, SourceFile};
use chaos_cycle::gateway::{Gateway, ReplayBackend, ScriptedBackend};
use chaos_cycle::project::{load_project_dir, validate_project_input};
use chaos_cycle::{run_cycle, CycleConfig, SimProvider};

pub const FIXTURES: [&str; 5] = ["nginx", "nginx-resilient", "sockshop", "policy", "futile"];

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture_config(name: &str) -> CycleConfig {
    CycleConfig::load(&fixture_dir(name).join("config.toml")).unwrap()
}

pub fn fixture_input(name: &str) -> ProjectInput {
    load_project_dir(&fixture_dir(name).join("input")).unwrap()
}

pub struct Run {
    pub record: CycleRecord,
    pub elapsed: Duration,
    pub deployments: usize,
    pub out: tempfile::TempDir,
}

/// Runs a fixture from its shipped transcript, writing artifacts to a temp dir.
pub fn run_fixture(name: &str) -> Run {
    let config = fixture_config(name);
    let input = fixture_input(name);
    let replay = ReplayBackend::load(config.transcript.as_ref().unwrap()).unwrap();
    let gateway = Gateway::new(Box::new(replay), config.prices());
    let mut provider = SimProvider::new(config.seed, config.sim);
    let out = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let record = run_cycle(&input, &config, &gateway, &mut provider, Some(out.path())).unwrap();
    Run {
        record,
        elapsed: started.elapsed(),
        deployments: provider.deployments,
        out,
    }
}

pub fn scripted(script: serde_json::Value) -> Gateway {
    let script = serde_json::from_value(script).unwrap();
    Gateway::new(Box::new(ScriptedBackend::new(script)), Default::default())
}

pub fn manifest_set(files: &[(&str, &str)], order: &[&str]) -> ManifestSet {
    let list: String = order.iter().map(|p| format!("  - {p}\n")).collect();
    validate_project_input(&ProjectInput {
        manifests: files.iter().map(|(p, t)| SourceFile { path: p.to_string(), text: t.to_string() }).collect(),
        deploy_config_path: "skaffold.yaml".into(),
        deploy_config: format!("apiVersion: skaffold/v4beta6\nkind: Config\nmanifests:\n  rawYaml:\n{list}"),
        instructions: None,
    })
    .unwrap()
}

pub fn deployment(name: &str, app: &str, replicas: u32) -> String {
    format!(
        "apiVersion: apps/v1\nkind: Deployment\nmetadata:\n  name: {name}\nspec:\n  replicas: {replicas}\n  selector:\n    matchLabels:\n      app: {app}\n  template:\n    metadata:\n      labels:\n        app: {app}\n"
    )
}

pub fn service(name: &str, app: &str) -> String {
    format!("apiVersion: v1\nkind: Service\nmetadata:\n  name: {name}\nspec:\n  selector:\n    app: {app}\n  ports:\n  - port: 80\n")
}

pub fn never_pod(name: &str, app: &str) -> String {
    format!("apiVersion: v1\nkind: Pod\nmetadata:\n  name: {name}\n  labels:\n    app: {app}\nspec:\n  restartPolicy: Never\n")
}
