//! Kubernetes resources, manifest sets, and field-level diffs between sets.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::doc::{diff_nodes, FieldChange, Node};
use crate::error::ModelError;

pub const DEFAULT_NAMESPACE: &str = "default";

pub type Labels = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RestartPolicy {
    Always,
    OnFailure,
    Never,
}

/// The semantically modeled part of a resource, per kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Workload {
    Pod {
        restart_policy: RestartPolicy,
    },
    Deployment {
        replicas: u32,
        pod_template_labels: Labels,
    },
    Service {
        selector: Labels,
        port: u16,
    },
    Other {
        kind_name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceId {
    pub kind: String,
    pub namespace: String,
    pub name: String,
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.kind, self.namespace, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub name: String,
    pub namespace: String,
    pub labels: Labels,
    pub workload: Workload,
    /// The full source document.
    pub spec: Node,
}

impl Resource {
    /// Extracts the modeled fields from a parsed document.
    pub fn from_document(doc: &Node) -> Result<Self, String> {
        let kind = doc
            .get("kind")
            .and_then(Node::as_str)
            .ok_or("missing `kind`")?;
        let name = doc
            .at(&["metadata", "name"])
            .and_then(Node::as_str)
            .filter(|n| !n.is_empty())
            .ok_or("missing `metadata.name`")?;
        let namespace = match doc.at(&["metadata", "namespace"]) {
            None | Some(Node::Null) => DEFAULT_NAMESPACE.to_string(),
            Some(n) => n.as_str().ok_or("`metadata.namespace` must be a string")?.into(),
        };
        let labels = labels_at(doc, &["metadata", "labels"])?;
        let workload = match kind {
            "Pod" => {
                let restart_policy = match doc.at(&["spec", "restartPolicy"]).and_then(Node::as_str) {
                    None | Some("Always") => RestartPolicy::Always,
                    Some("OnFailure") => RestartPolicy::OnFailure,
                    Some("Never") => RestartPolicy::Never,
                    Some(other) => return Err(format!("unknown restartPolicy `{other}`")),
                };
                Workload::Pod { restart_policy }
            }
            "Deployment" => {
                let replicas = match doc.at(&["spec", "replicas"]) {
                    None | Some(Node::Null) => 1,
                    Some(n) => n.as_i64().ok_or("`spec.replicas` must be an integer")?,
                };
                if replicas < 1 {
                    return Err(format!("Deployment replicas must be >= 1, got {replicas}"));
                }
                let replicas = u32::try_from(replicas).map_err(|_| "replicas out of range")?;
                let pod_template_labels = labels_at(doc, &["spec", "template", "metadata", "labels"])?;
                Workload::Deployment {
                    replicas,
                    pod_template_labels,
                }
            }
            "Service" => {
                let selector = labels_at(doc, &["spec", "selector"])?;
                if selector.is_empty() {
                    return Err("Service selector must be non-empty".into());
                }
                let port = doc
                    .at(&["spec", "ports"])
                    .and_then(Node::as_seq)
                    .and_then(|ports| ports.first())
                    .and_then(|p| p.get("port"))
                    .and_then(Node::as_i64)
                    .ok_or("Service needs `spec.ports[0].port`")?;
                let port = u16::try_from(port).map_err(|_| format!("port {port} out of range"))?;
                Workload::Service { selector, port }
            }
            other => Workload::Other {
                kind_name: other.to_string(),
            },
        };
        Ok(Resource {
            name: name.into(),
            namespace,
            labels,
            workload,
            spec: doc.clone(),
        })
    }

    pub fn kind(&self) -> &str {
        match &self.workload {
            Workload::Pod { .. } => "Pod",
            Workload::Deployment { .. } => "Deployment",
            Workload::Service { .. } => "Service",
            Workload::Other { kind_name } => kind_name,
        }
    }

    pub fn id(&self) -> ResourceId {
        ResourceId {
            kind: self.kind().into(),
            namespace: self.namespace.clone(),
            name: self.name.clone(),
        }
    }

    /// Labels carried by the pods this resource produces, if it produces any.
    pub fn pod_labels(&self) -> Option<&Labels> {
        match &self.workload {
            Workload::Pod { .. } => Some(&self.labels),
            Workload::Deployment {
                pod_template_labels,
                ..
            } => Some(pod_template_labels),
            _ => None,
        }
    }
}

fn labels_at(doc: &Node, path: &[&str]) -> Result<Labels, String> {
    let Some(node) = doc.at(path) else {
        return Ok(Labels::new());
    };
    if matches!(node, Node::Null) {
        return Ok(Labels::new());
    }
    let map = node
        .as_map()
        .ok_or_else(|| format!("`{}` must be a map", path.join(".")))?;
    map.iter()
        .map(|(k, v)| {
            if k.is_empty() {
                return Err(format!("empty label key in `{}`", path.join(".")));
            }
            let v = v
                .scalar_text()
                .ok_or_else(|| format!("label `{k}` must be a scalar"))?;
            Ok((k.clone(), v))
        })
        .collect()
}

/// Returns true if every selector label is present with the same value.
pub fn labels_match(selector: &Labels, labels: &Labels) -> bool {
    selector.iter().all(|(k, v)| labels.get(k) == Some(v))
}

/// Label selector scoped to a namespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelSelector {
    pub namespace: String,
    pub labels: Labels,
}

impl LabelSelector {
    pub fn new(namespace: impl Into<String>, labels: &[(&str, &str)]) -> Self {
        LabelSelector {
            namespace: namespace.into(),
            labels: labels.iter().map(|(k, v)| ((*k).into(), (*v).into())).collect(),
        }
    }

    pub fn matches(&self, namespace: &str, labels: &Labels) -> bool {
        !self.labels.is_empty() && self.namespace == namespace && labels_match(&self.labels, labels)
    }
}

impl fmt::Display for LabelSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.labels {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        write!(f, " in {}", self.namespace)
    }
}

/// One manifest file: its raw text, parsed documents, and the resources they define.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub text: String,
    pub documents: Vec<Node>,
    pub resources: Vec<Resource>,
}

impl ManifestFile {
    /// Builds a file from already-parsed documents. Empty (null) documents are skipped.
    pub fn new(path: impl Into<String>, text: impl Into<String>, documents: Vec<Node>) -> Result<Self, ModelError> {
        let path = path.into();
        let documents: Vec<Node> = documents.into_iter().filter(|d| *d != Node::Null).collect();
        let resources = documents
            .iter()
            .enumerate()
            .map(|(index, doc)| {
                Resource::from_document(doc).map_err(|reason| ModelError::MalformedDocument {
                    path: path.clone(),
                    index,
                    reason,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ManifestFile {
            path,
            text: text.into(),
            documents,
            resources,
        })
    }
}

/// Parsed resources of a project, ordered as the deployment config lists them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSet {
    files: Vec<ManifestFile>,
}

impl ManifestSet {
    pub fn new(files: Vec<ManifestFile>) -> Result<Self, ModelError> {
        let mut paths = BTreeMap::new();
        let mut ids = BTreeMap::new();
        for file in &files {
            if paths.insert(file.path.as_str(), ()).is_some() {
                return Err(ModelError::DuplicatePath(file.path.clone()));
            }
            for resource in &file.resources {
                let id = resource.id();
                if ids.insert(id.clone(), ()).is_some() {
                    return Err(ModelError::DuplicateResourceId(id.to_string()));
                }
            }
        }
        Ok(ManifestSet { files })
    }

    pub fn files(&self) -> &[ManifestFile] {
        &self.files
    }

    pub fn file(&self, path: &str) -> Option<&ManifestFile> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn contains_path(&self, path: &str) -> bool {
        self.file(path).is_some()
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|f| f.path.as_str())
    }

    /// Resources in deployment order.
    pub fn resources(&self) -> impl Iterator<Item = &Resource> {
        self.files.iter().flat_map(|f| f.resources.iter())
    }

    pub fn source_path(&self, id: &ResourceId) -> Option<&str> {
        self.files
            .iter()
            .find(|f| f.resources.iter().any(|r| &r.id() == id))
            .map(|f| f.path.as_str())
    }

    pub fn into_files(self) -> Vec<ManifestFile> {
        self.files
    }

    /// Resources whose pods would be selected by `selector`.
    pub fn workloads_matching<'a>(&'a self, selector: &'a LabelSelector) -> impl Iterator<Item = &'a Resource> + 'a {
        self.resources().filter(move |r| {
            r.pod_labels()
                .is_some_and(|labels| selector.matches(&r.namespace, labels))
        })
    }

    pub fn service(&self, namespace: &str, name: &str) -> Option<&Resource> {
        self.resources().find(|r| {
            matches!(r.workload, Workload::Service { .. }) && r.namespace == namespace && r.name == name
        })
    }

    /// Equality of the path → documents mapping, ignoring file order and raw text.
    pub fn structurally_eq(&self, other: &ManifestSet) -> bool {
        self.files.len() == other.files.len()
            && self
                .files
                .iter()
                .all(|f| other.file(&f.path).is_some_and(|g| g.documents == f.documents))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    pub fields: Vec<FieldChange>,
}

/// Path-level and field-level differences between two manifest sets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChangeSet {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub modified: Vec<FileChange>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.modified.is_empty()
    }
}

/// Diffs two sets by path. Documents within a file are compared by index;
/// when either side holds more than one document, field paths are prefixed
/// with `<index>:`.
pub fn diff_manifest_sets(old: &ManifestSet, new: &ManifestSet) -> ChangeSet {
    let mut changes = ChangeSet::default();
    for file in &old.files {
        match new.file(&file.path) {
            None => changes.removed.push(file.path.clone()),
            Some(updated) => {
                let fields = diff_documents(&file.documents, &updated.documents);
                if !fields.is_empty() {
                    changes.modified.push(FileChange {
                        path: file.path.clone(),
                        fields,
                    });
                }
            }
        }
    }
    for file in &new.files {
        if !old.contains_path(&file.path) {
            changes.added.push(file.path.clone());
        }
    }
    changes.added.sort();
    changes.removed.sort();
    changes.modified.sort_by(|a, b| a.path.cmp(&b.path));
    changes
}

fn diff_documents(old: &[Node], new: &[Node]) -> Vec<FieldChange> {
    if old.len() <= 1 && new.len() <= 1 {
        let null = Node::Null;
        return diff_nodes(old.first().unwrap_or(&null), new.first().unwrap_or(&null));
    }
    let mut out = Vec::new();
    for i in 0..old.len().max(new.len()) {
        match (old.get(i), new.get(i)) {
            (Some(a), Some(b)) => out.extend(diff_nodes(a, b).into_iter().map(|mut c| {
                c.path = format!("{i}:{}", c.path);
                c
            })),
            (a, b) => out.push(FieldChange {
                path: format!("{i}:"),
                old: a.cloned(),
                new: b.cloned(),
            }),
        }
    }
    out
}
