//! Applying reconfigurations to manifest sets and writing the output folder.

use std::fs;
use std::path::Path;

use chaos_core::manifest::labels_match;
use chaos_core::{diff_manifest_sets, ManifestFile, ManifestSet, ModelError, ReconfigOp, Reconfiguration, Workload};

use crate::project;
use crate::yaml;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("path not found: {0}")]
    PathNotFound(String),
    #[error("path already exists: {0}")]
    PathExists(String),
    #[error("path `{0}` is touched by more than one op")]
    RepeatedPath(String),
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

/// A Service whose selector matches no pod template after reconfiguration.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DanglingSelector {
    pub service: String,
    pub selector: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub set: ManifestSet,
    pub warnings: Vec<DanglingSelector>,
}

/// Applies ops in order. Replaced files keep their position, deleted files
/// drop out, and created files are appended to the deploy order.
pub fn apply_reconfiguration(current: &ManifestSet, reconf: &Reconfiguration) -> Result<Applied, EngineError> {
    let mut files: Vec<ManifestFile> = current.files().to_vec();
    let mut touched = std::collections::BTreeSet::new();
    for op in &reconf.ops {
        if !touched.insert(op.path().to_string()) {
            return Err(EngineError::RepeatedPath(op.path().to_string()));
        }
        let pos = files.iter().position(|f| f.path == op.path());
        match (op, pos) {
            (ReconfigOp::Replace { path, text }, Some(i)) => files[i] = yaml::parse_manifest_file(path, text)?,
            (ReconfigOp::Create { path, text }, None) => files.push(yaml::parse_manifest_file(path, text)?),
            (ReconfigOp::Delete { .. }, Some(i)) => {
                files.remove(i);
            }
            (ReconfigOp::Create { path, .. }, Some(_)) => return Err(EngineError::PathExists(path.clone())),
            (_, None) => return Err(EngineError::PathNotFound(op.path().to_string())),
        }
    }
    let set = ManifestSet::new(files)?;
    let warnings = dangling_selectors(&set);
    Ok(Applied { set, warnings })
}

pub fn dangling_selectors(set: &ManifestSet) -> Vec<DanglingSelector> {
    set.resources()
        .filter_map(|r| match &r.workload {
            Workload::Service { selector, .. } => {
                let backed = set
                    .resources()
                    .any(|w| w.namespace == r.namespace && w.pod_labels().is_some_and(|l| labels_match(selector, l)));
                (!backed).then(|| DanglingSelector {
                    service: r.id().to_string(),
                    selector: selector.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(","),
                })
            }
            _ => None,
        })
        .collect()
}

/// The reconfiguration that turns `old` into `new`: deletes, then replaces,
/// then creates in `new`'s deploy order.
pub fn reconfiguration_from_diff(old: &ManifestSet, new: &ManifestSet) -> Reconfiguration {
    let changes = diff_manifest_sets(old, new);
    let text = |path: &str| file_text(new.file(path).expect("path taken from new"));
    let mut ops: Vec<ReconfigOp> = changes.removed.iter().map(|p| ReconfigOp::Delete { path: p.clone() }).collect();
    ops.extend(changes.modified.iter().map(|c| ReconfigOp::Replace { path: c.path.clone(), text: text(&c.path) }));
    ops.extend(
        new.paths()
            .filter(|p| changes.added.iter().any(|a| a == p))
            .map(|p| ReconfigOp::Create { path: p.to_string(), text: text(p) }),
    );
    Reconfiguration {
        ops,
        rationale: "derived from manifest diff".into(),
    }
}

/// The file's original text, or a rendering of its documents when it has none.
pub fn file_text(file: &ManifestFile) -> String {
    if file.text.is_empty() && !file.documents.is_empty() {
        yaml::render_documents(&file.documents)
    } else {
        file.text.clone()
    }
}

/// Writes one file per manifest at its path, plus the deploy config. The
/// config is copied verbatim when the deploy order is unchanged and
/// regenerated otherwise.
pub fn write_output_folder(set: &ManifestSet, deploy_config_path: &str, deploy_config: &str, dest: &Path) -> Result<(), std::io::Error> {
    let invalid = |e: ModelError| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string());
    let patterns = project::deploy_patterns(deploy_config, deploy_config_path).map_err(invalid)?;
    let paths: Vec<&str> = set.paths().collect();
    let same_order = project::deploy_order(&patterns, &paths).is_ok_and(|order| order == paths);
    let config_text = if same_order {
        deploy_config.to_string()
    } else {
        project::regenerate_deploy_config(deploy_config, deploy_config_path, &paths).map_err(invalid)?
    };
    fs::create_dir_all(dest)?;
    for file in set.files() {
        let target = dest.join(&file.path);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(target, file_text(file))?;
    }
    fs::write(dest.join(deploy_config_path), config_text)
}
