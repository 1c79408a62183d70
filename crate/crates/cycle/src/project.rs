//! Project input: loading a directory, reading the Skaffold manifest list,
//! and turning raw input into a validated manifest set.

use std::fs;
use std::path::{Path, PathBuf};

use chaos_core::{ManifestSet, ModelError, Node, ProjectInput, SourceFile};

use crate::yaml;

pub const DEPLOY_CONFIG_NAMES: [&str; 2] = ["skaffold.yaml", "skaffold.yml"];
pub const INSTRUCTIONS_FILE: &str = "instructions.txt";

#[derive(Debug, thiserror::Error)]
pub enum ProjectError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no skaffold.yaml in {0}")]
    NoDeployConfig(PathBuf),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn read(path: &Path) -> Result<String, ProjectError> {
    fs::read_to_string(path).map_err(|source| ProjectError::Io { path: path.to_path_buf(), source })
}

/// Reads a project directory: the deploy config, every other `.yml`/`.yaml`
/// file as a manifest, and `instructions.txt` when present.
pub fn load_project_dir(dir: &Path) -> Result<ProjectInput, ProjectError> {
    let config_name = DEPLOY_CONFIG_NAMES
        .iter()
        .find(|n| dir.join(n).is_file())
        .ok_or_else(|| ProjectError::NoDeployConfig(dir.to_path_buf()))?;
    let deploy_config = read(&dir.join(config_name))?;
    let mut manifests = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| ProjectError::Io {
            path: dir.to_path_buf(),
            source: e.into(),
        })?;
        let rel = entry.path().strip_prefix(dir).expect("walk stays under dir");
        let rel = rel.to_string_lossy().replace('\\', "/");
        let is_yaml = rel.ends_with(".yml") || rel.ends_with(".yaml");
        if entry.file_type().is_file() && is_yaml && rel != *config_name {
            manifests.push(SourceFile { text: read(entry.path())?, path: rel });
        }
    }
    let instructions = match dir.join(INSTRUCTIONS_FILE) {
        p if p.is_file() => Some(read(&p)?.trim().to_string()),
        _ => None,
    };
    Ok(ProjectInput {
        manifests,
        deploy_config_path: (*config_name).to_string(),
        deploy_config,
        instructions,
    })
}

/// Where in a Skaffold config the manifest list lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ListLocation {
    /// `manifests.rawYaml` (v3+ schemas).
    RawYaml,
    /// `deploy.kubectl.manifests` (v2 schemas).
    Kubectl,
}

impl ListLocation {
    fn path(self) -> &'static [&'static str] {
        match self {
            ListLocation::RawYaml => &["manifests", "rawYaml"],
            ListLocation::Kubectl => &["deploy", "kubectl", "manifests"],
        }
    }
}

fn config_document(text: &str, path: &str) -> Result<(Vec<Node>, usize, ListLocation), ModelError> {
    let docs = yaml::parse_documents(path, text)?;
    for (i, doc) in docs.iter().enumerate() {
        for loc in [ListLocation::RawYaml, ListLocation::Kubectl] {
            if doc.at(loc.path()).is_some() {
                return Ok((docs, i, loc));
            }
        }
    }
    Err(ModelError::MalformedDocument {
        path: path.to_string(),
        index: 0,
        reason: "no manifests.rawYaml or deploy.kubectl.manifests list".into(),
    })
}

/// The manifest patterns listed by a Skaffold config, in order.
pub fn deploy_patterns(text: &str, path: &str) -> Result<Vec<String>, ModelError> {
    let (docs, i, loc) = config_document(text, path)?;
    let list = docs[i].at(loc.path()).and_then(Node::as_seq).ok_or_else(|| ModelError::MalformedDocument {
        path: path.to_string(),
        index: i,
        reason: format!("{} is not a list", loc.path().join(".")),
    })?;
    list.iter()
        .map(|n| {
            n.as_str().map(String::from).ok_or_else(|| ModelError::MalformedDocument {
                path: path.to_string(),
                index: i,
                reason: "manifest entries must be strings".into(),
            })
        })
        .collect()
}

fn normalize(p: &str) -> &str {
    p.strip_prefix("./").unwrap_or(p)
}

/// Resolves the config's patterns against the available manifest paths.
/// Literal entries must exist; glob entries may match several files, in
/// name order, and each path is taken once.
pub fn deploy_order(patterns: &[String], available: &[&str]) -> Result<Vec<String>, ModelError> {
    let mut order: Vec<String> = Vec::new();
    for pattern in patterns {
        let pattern = normalize(pattern);
        let is_glob = pattern.contains(['*', '?', '[']);
        let mut hits: Vec<&str> = if is_glob {
            let compiled = glob::Pattern::new(pattern).map_err(|e| ModelError::MalformedDocument {
                path: pattern.to_string(),
                index: 0,
                reason: e.to_string(),
            })?;
            available.iter().copied().filter(|p| compiled.matches(p)).collect()
        } else {
            available.iter().copied().filter(|p| *p == pattern).collect()
        };
        hits.sort_unstable();
        if hits.is_empty() {
            return Err(ModelError::MissingReference(pattern.to_string()));
        }
        for hit in hits {
            if !order.iter().any(|o| o == hit) {
                order.push(hit.to_string());
            }
        }
    }
    Ok(order)
}

/// Parses and validates raw input into the deployed manifest set, in deploy
/// order. Manifests the config does not reference are not deployed and are
/// left out of the set.
pub fn validate_project_input(input: &ProjectInput) -> Result<ManifestSet, ModelError> {
    if input.manifests.is_empty() {
        return Err(ModelError::EmptyInput("manifest list"));
    }
    let patterns = deploy_patterns(&input.deploy_config, &input.deploy_config_path)?;
    let available: Vec<&str> = input.manifests.iter().map(|m| normalize(&m.path)).collect();
    let order = deploy_order(&patterns, &available)?;
    let mut files = Vec::with_capacity(order.len());
    for path in &order {
        let source = input.manifests.iter().find(|m| normalize(&m.path) == path).expect("resolved above");
        files.push(yaml::parse_manifest_file(path, &source.text)?);
    }
    ManifestSet::new(files)
}

/// Rewrites the manifest list of a Skaffold config to `paths`, keeping every
/// other field (including `apiVersion`) as it was.
pub fn regenerate_deploy_config(original: &str, config_path: &str, paths: &[&str]) -> Result<String, ModelError> {
    let (mut docs, i, loc) = config_document(original, config_path)?;
    *docs[i].entry_at(loc.path()) = Node::Seq(paths.iter().map(|p| Node::str(*p)).collect());
    Ok(yaml::render_documents(&docs))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SKAFFOLD: &str = "apiVersion: skaffold/v4beta6\nkind: Config\nmanifests:\n  rawYaml:\n    - Pod.yml\n    - Service.yml\n";

    fn input(files: &[(&str, &str)], config: &str) -> ProjectInput {
        ProjectInput {
            manifests: files.iter().map(|(p, t)| SourceFile { path: p.to_string(), text: t.to_string() }).collect(),
            deploy_config_path: "skaffold.yaml".into(),
            deploy_config: config.into(),
            instructions: None,
        }
    }

    const POD: &str = "apiVersion: v1\nkind: Pod\nmetadata:\n  name: web\n  labels: {app: web}\nspec:\n  restartPolicy: Never\n";
    const SVC: &str = "apiVersion: v1\nkind: Service\nmetadata:\n  name: web\nspec:\n  selector: {app: web}\n  ports: [{port: 80}]\n";

    #[test]
    fn deploy_order_follows_config() {
        let set = validate_project_input(&input(&[("Service.yml", SVC), ("Pod.yml", POD)], SKAFFOLD)).unwrap();
        let paths: Vec<&str> = set.paths().collect();
        assert_eq!(paths, ["Pod.yml", "Service.yml"]);
        assert_eq!(set.resources().next().unwrap().kind(), "Pod");
    }

    #[test]
    fn missing_reference_and_empty() {
        let err = validate_project_input(&input(&[("Pod.yml", POD)], SKAFFOLD)).unwrap_err();
        assert_eq!(err, ModelError::MissingReference("Service.yml".into()));
        let err = validate_project_input(&input(&[], SKAFFOLD)).unwrap_err();
        assert!(matches!(err, ModelError::EmptyInput(_)));
    }

    #[test]
    fn kubectl_schema_and_globs() {
        let config = "apiVersion: skaffold/v2beta29\nkind: Config\ndeploy:\n  kubectl:\n    manifests:\n      - k8s/*.yml\n";
        let set = validate_project_input(&input(&[("k8s/b.yml", SVC), ("k8s/a.yml", POD)], config)).unwrap();
        let paths: Vec<&str> = set.paths().collect();
        assert_eq!(paths, ["k8s/a.yml", "k8s/b.yml"]);
    }

    #[test]
    fn regeneration_keeps_api_version() {
        let out = regenerate_deploy_config(SKAFFOLD, "skaffold.yaml", &["Service.yml", "Deployment.yml"]).unwrap();
        let docs = yaml::parse_documents("skaffold.yaml", &out).unwrap();
        assert_eq!(docs[0].get("apiVersion").and_then(Node::as_str), Some("skaffold/v4beta6"));
        assert_eq!(deploy_patterns(&out, "skaffold.yaml").unwrap(), ["Service.yml", "Deployment.yml"]);
    }
}
