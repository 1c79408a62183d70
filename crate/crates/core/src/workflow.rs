//! Compilation of experiment plans into Chaos-Mesh-compatible workflows, and
//! the reverse walk that recovers a schedule from a workflow.
//!
//! Layout produced by [`compile_workflow`]:
//!
//! ```text
//! entry (Serial)
//! ├── pre-stage (Serial, deadline = stage duration)
//! │   └── pre-group-0 (Parallel)            all items share offset 0
//! ├── fault-stage (Serial)
//! │   └── fault-branches (Parallel)         items at several offsets
//! │       ├── fault-group-0 (Parallel)      offset 0
//! │       └── fault-delay-1 (Serial)
//! │           ├── fault-suspend-1 (Suspend, deadline = offset)
//! │           └── fault-group-1 (Parallel)
//! └── post-stage (Serial)
//! ```
//!
//! Leaves are named `<stage>-<task>-<index>`, where index counts items of the
//! stage in plan order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::doc::Node;
use crate::fault::{FaultAction, FaultKind, FaultSpec, SelectorMode};
use crate::model::VaCSpec;
use crate::plan::{ExperimentPlan, ScheduledItem, Stage, Task};

pub const WORKFLOW_API_VERSION: &str = "chaos-mesh.org/v1alpha1";
pub const DEFAULT_WORKFLOW_NAME: &str = "chaos-experiment";
pub const VAC_RUNNER_IMAGE: &str = "chaos-cycle/vac-runner:latest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateType {
    Serial,
    Parallel,
    Suspend,
    PodChaos,
    NetworkChaos,
    StressChaos,
    Task,
}

impl From<FaultKind> for TemplateType {
    fn from(kind: FaultKind) -> Self {
        match kind {
            FaultKind::PodChaos => TemplateType::PodChaos,
            FaultKind::NetworkChaos => TemplateType::NetworkChaos,
            FaultKind::StressChaos => TemplateType::StressChaos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Fault(FaultSpec),
    Vac(VaCSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowNode {
    pub name: String,
    pub template_type: TemplateType,
    pub deadline_s: u32,
    #[serde(default)]
    pub children: Vec<String>,
    #[serde(default)]
    pub payload: Option<Payload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowManifest {
    pub name: String,
    pub namespace: String,
    pub entry: String,
    pub templates: Vec<WorkflowNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unsound workflow: {0}")]
pub struct WorkflowUnsound(pub String);

fn unsound(reason: impl Into<String>) -> WorkflowUnsound {
    WorkflowUnsound(reason.into())
}

/// A leaf recovered from a workflow, with its absolute timing.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledLeaf {
    pub node: String,
    pub item: ScheduledItem,
    pub payload: Payload,
}

/// The schedule a workflow encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowSchedule {
    /// Start of each stage relative to workflow start, and its length.
    pub stages: [(u32, u32); 3],
    pub leaves: Vec<ScheduledLeaf>,
}

impl WorkflowSchedule {
    pub fn total_s(&self) -> u32 {
        self.stages.iter().map(|(_, len)| len).sum()
    }

    pub fn stage_start(&self, stage: Stage) -> u32 {
        self.stages[stage as usize].0
    }
}

fn task_slug(task: &Task, plan: &ExperimentPlan) -> String {
    match task {
        Task::RunVac { .. } => "vac".into(),
        Task::InjectFault { fault } => plan
            .fault(fault)
            .map(|f| format!("{:?}", f.kind()).to_lowercase())
            .unwrap_or_else(|| "fault".into()),
    }
}

/// Compiles a plan using the default workflow name.
pub fn compile_workflow(plan: &ExperimentPlan) -> WorkflowManifest {
    compile_workflow_named(plan, DEFAULT_WORKFLOW_NAME)
}

/// Compiles a validated plan. Plans that fail validation still compile, but
/// leaves whose references do not resolve are dropped.
pub fn compile_workflow_named(plan: &ExperimentPlan, name: &str) -> WorkflowManifest {
    let mut templates = Vec::new();
    let mut stage_nodes = Vec::new();
    for stage in Stage::ALL {
        let stage_len = plan.stage_durations.of(stage);
        let prefix = stage.as_str();
        // group leaves by start offset, preserving plan order inside a group
        let mut groups: BTreeMap<u32, Vec<String>> = BTreeMap::new();
        let mut leaves = Vec::new();
        for (index, item) in plan.stage_items(stage).enumerate() {
            let payload = match &item.task {
                Task::RunVac { steady_state } => plan.vac(steady_state).cloned().map(Payload::Vac),
                Task::InjectFault { fault } => plan.fault(fault).cloned().map(Payload::Fault),
            };
            let Some(payload) = payload else { continue };
            let leaf_name = format!("{prefix}-{}-{index}", task_slug(&item.task, plan));
            let template_type = match &payload {
                Payload::Vac(_) => TemplateType::Task,
                Payload::Fault(f) => f.kind().into(),
            };
            groups.entry(item.start_offset_s).or_default().push(leaf_name.clone());
            leaves.push(WorkflowNode {
                name: leaf_name,
                template_type,
                deadline_s: item.duration_s,
                children: Vec::new(),
                payload: Some(payload),
            });
        }
        let deadline_of = |names: &[String]| {
            leaves
                .iter()
                .filter(|l| names.contains(&l.name))
                .map(|l| l.deadline_s)
                .max()
                .unwrap_or(0)
        };
        let mut branch_names = Vec::new();
        let mut wrappers = Vec::new();
        for (g, (offset, members)) in groups.iter().enumerate() {
            let group_name = format!("{prefix}-group-{g}");
            let group_deadline = deadline_of(members);
            wrappers.push(WorkflowNode {
                name: group_name.clone(),
                template_type: TemplateType::Parallel,
                deadline_s: group_deadline,
                children: members.clone(),
                payload: None,
            });
            if *offset == 0 {
                branch_names.push(group_name);
            } else {
                let suspend = format!("{prefix}-suspend-{g}");
                let delay = format!("{prefix}-delay-{g}");
                wrappers.push(WorkflowNode {
                    name: suspend.clone(),
                    template_type: TemplateType::Suspend,
                    deadline_s: *offset,
                    children: Vec::new(),
                    payload: None,
                });
                wrappers.push(WorkflowNode {
                    name: delay.clone(),
                    template_type: TemplateType::Serial,
                    deadline_s: offset + group_deadline,
                    children: vec![suspend, group_name],
                    payload: None,
                });
                branch_names.push(delay);
            }
        }
        let stage_name = format!("{prefix}-stage");
        let stage_children = if branch_names.len() == 1 && groups.keys().next() == Some(&0) {
            branch_names
        } else {
            let branches = format!("{prefix}-branches");
            wrappers.push(WorkflowNode {
                name: branches.clone(),
                template_type: TemplateType::Parallel,
                deadline_s: stage_len,
                children: branch_names,
                payload: None,
            });
            vec![branches]
        };
        templates.push(WorkflowNode {
            name: stage_name.clone(),
            template_type: TemplateType::Serial,
            deadline_s: stage_len,
            children: stage_children,
            payload: None,
        });
        templates.extend(wrappers);
        templates.extend(leaves);
        stage_nodes.push(stage_name);
    }
    let entry = WorkflowNode {
        name: "entry".into(),
        template_type: TemplateType::Serial,
        deadline_s: plan.stage_durations.total() as u32,
        children: stage_nodes,
        payload: None,
    };
    templates.insert(0, entry);
    WorkflowManifest {
        name: name.into(),
        namespace: "chaos-mesh".into(),
        entry: "entry".into(),
        templates,
    }
}

impl WorkflowManifest {
    pub fn node(&self, name: &str) -> Option<&WorkflowNode> {
        self.templates.iter().find(|n| n.name == name)
    }

    /// Checks names, references, acyclicity, payload/type agreement, and the
    /// three-stage entry layout.
    pub fn validate(&self) -> Result<(), WorkflowUnsound> {
        let mut names = BTreeSet::new();
        for node in &self.templates {
            if !names.insert(node.name.as_str()) {
                return Err(unsound(format!("duplicate node `{}`", node.name)));
            }
        }
        let entry = self
            .node(&self.entry)
            .ok_or_else(|| unsound(format!("entry `{}` missing", self.entry)))?;
        for node in &self.templates {
            for child in &node.children {
                if !names.contains(child.as_str()) {
                    return Err(unsound(format!("`{}` references missing `{child}`", node.name)));
                }
            }
            match (node.template_type, &node.payload) {
                (TemplateType::Serial | TemplateType::Parallel, None) => {
                    if node.children.is_empty() {
                        return Err(unsound(format!("`{}` has no children", node.name)));
                    }
                }
                (TemplateType::Suspend, None) if node.children.is_empty() => {}
                (TemplateType::Task, Some(Payload::Vac(_))) if node.children.is_empty() => {}
                (t, Some(Payload::Fault(f))) if node.children.is_empty() && t == f.kind().into() => {}
                _ => return Err(unsound(format!("`{}` has inconsistent type, payload, or children", node.name))),
            }
        }
        // acyclicity: iterative DFS with colors
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        let mut stack: Vec<(&str, usize)> = vec![(self.entry.as_str(), 0)];
        state.insert(self.entry.as_str(), 1);
        while let Some((name, child_idx)) = stack.pop() {
            let node = self.node(name).expect("checked above");
            if let Some(child) = node.children.get(child_idx) {
                stack.push((name, child_idx + 1));
                match state.get(child.as_str()) {
                    Some(1) => return Err(unsound(format!("cycle through `{child}`"))),
                    Some(_) => {}
                    None => {
                        state.insert(child.as_str(), 1);
                        stack.push((child.as_str(), 0));
                    }
                }
            } else {
                state.insert(name, 2);
            }
        }
        if entry.template_type != TemplateType::Serial || entry.children.len() != 3 {
            return Err(unsound("entry must be a Serial node with three stage children"));
        }
        for child in &entry.children {
            if self.node(child).map(|n| n.template_type) != Some(TemplateType::Serial) {
                return Err(unsound(format!("stage `{child}` is not a Serial node")));
            }
        }
        Ok(())
    }

    /// Recovers stage boundaries and leaf timings. Serial children run one
    /// after another, each occupying its deadline; Parallel children start
    /// together; a stage occupies exactly its own deadline.
    pub fn schedule(&self) -> Result<WorkflowSchedule, WorkflowUnsound> {
        self.validate()?;
        let entry = self.node(&self.entry).expect("validated");
        let mut stages = [(0u32, 0u32); 3];
        let mut leaves = Vec::new();
        let mut cursor = 0u32;
        for (i, stage_name) in entry.children.iter().enumerate() {
            let stage = Stage::ALL[i];
            let node = self.node(stage_name).expect("validated");
            stages[i] = (cursor, node.deadline_s);
            self.walk(node, 0, stage, &mut leaves)?;
            cursor += node.deadline_s;
        }
        for leaf in &leaves {
            let len = stages[leaf.item.stage as usize].1;
            if leaf.item.start_offset_s + leaf.item.duration_s > len {
                return Err(unsound(format!("`{}` runs past the end of its stage", leaf.node)));
            }
        }
        Ok(WorkflowSchedule { stages, leaves })
    }

    fn walk(&self, node: &WorkflowNode, start: u32, stage: Stage, out: &mut Vec<ScheduledLeaf>) -> Result<(), WorkflowUnsound> {
        match node.template_type {
            TemplateType::Serial => {
                let mut t = start;
                for child in &node.children {
                    let child = self.node(child).expect("validated");
                    self.walk(child, t, stage, out)?;
                    t += child.deadline_s;
                }
            }
            TemplateType::Parallel => {
                for child in &node.children {
                    self.walk(self.node(child).expect("validated"), start, stage, out)?;
                }
            }
            TemplateType::Suspend => {}
            _ => {
                let payload = node.payload.clone().expect("validated");
                let task = match &payload {
                    Payload::Vac(v) => Task::RunVac {
                        steady_state: v.steady_state_name.clone(),
                    },
                    Payload::Fault(f) => Task::InjectFault { fault: f.name.clone() },
                };
                out.push(ScheduledLeaf {
                    node: node.name.clone(),
                    item: ScheduledItem {
                        stage,
                        task,
                        start_offset_s: start,
                        duration_s: node.deadline_s,
                    },
                    payload,
                });
            }
        }
        Ok(())
    }

    /// Renders the Chaos Mesh `Workflow` document.
    pub fn to_document(&self) -> Node {
        let templates: Vec<Node> = self.templates.iter().map(node_document).collect();
        Node::map()
            .with("apiVersion", WORKFLOW_API_VERSION.into())
            .with("kind", "Workflow".into())
            .with(
                "metadata",
                Node::map()
                    .with("name", self.name.as_str().into())
                    .with("namespace", self.namespace.as_str().into()),
            )
            .with(
                "spec",
                Node::map()
                    .with("entry", self.entry.as_str().into())
                    .with("templates", Node::Seq(templates)),
            )
    }
}

fn duration(s: u32) -> Node {
    Node::Str(format!("{s}s"))
}

fn selector_document(fault: &FaultSpec) -> (Node, Node) {
    let selector = Node::map()
        .with("namespaces", vec![fault.selector.scope.namespace.as_str()].into())
        .with("labelSelectors", Node::string_map(&fault.selector.scope.labels));
    let (mode, value) = match fault.selector.mode {
        SelectorMode::One => ("one", None),
        SelectorMode::All => ("all", None),
        SelectorMode::FixedCount(n) => ("fixed", Some(n)),
    };
    let mut mode_node = Node::map().with("mode", mode.into());
    if let Some(n) = value {
        mode_node.insert("value", Node::Str(n.to_string()));
    }
    (selector, mode_node)
}

fn fault_document(fault: &FaultSpec) -> (&'static str, Node) {
    let (selector, mode) = selector_document(fault);
    let mut body = mode.with("selector", selector);
    let key = match &fault.action {
        FaultAction::PodKill { grace_period_s } => {
            body.insert("action", "pod-kill".into());
            body.insert("gracePeriod", (*grace_period_s).into());
            "podChaos"
        }
        FaultAction::PodFailure => {
            body.insert("action", "pod-failure".into());
            "podChaos"
        }
        FaultAction::Delay { latency_ms } => {
            body.insert("action", "delay".into());
            body.insert("delay", Node::map().with("latency", Node::Str(format!("{latency_ms}ms"))));
            "networkChaos"
        }
        FaultAction::Loss { loss_pct } => {
            body.insert("action", "loss".into());
            body.insert("loss", Node::map().with("loss", Node::Str(loss_pct.to_string())));
            "networkChaos"
        }
        FaultAction::Cpu { workers } => {
            body.insert(
                "stressors",
                Node::map().with("cpu", Node::map().with("workers", (*workers).into())),
            );
            "stressChaos"
        }
    };
    (key, body)
}

fn node_document(node: &WorkflowNode) -> Node {
    let mut doc = Node::map()
        .with("name", node.name.as_str().into())
        .with("templateType", Node::Str(format!("{:?}", node.template_type)))
        .with("deadline", duration(node.deadline_s));
    if !node.children.is_empty() {
        doc.insert("children", Node::Seq(node.children.iter().map(|c| c.as_str().into()).collect()));
    }
    match &node.payload {
        Some(Payload::Fault(f)) => {
            let (key, body) = fault_document(f);
            doc.insert(key, body);
        }
        Some(Payload::Vac(v)) => {
            let command: Vec<Node> = vec![
                "vac-runner".into(),
                "--steady-state".into(),
                v.steady_state_name.as_str().into(),
                "--duration".into(),
                duration(node.deadline_s),
            ];
            doc.insert(
                "task",
                Node::map().with(
                    "container",
                    Node::map()
                        .with("name", node.name.as_str().into())
                        .with("image", VAC_RUNNER_IMAGE.into())
                        .with("command", Node::Seq(command)),
                ),
            );
        }
        None => {}
    }
    doc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::tests::{fault_task, item, nginx_plan, pod_kill, pod_vac, vac_task};

    #[test]
    fn nginx_plan_compiles_to_three_stages() {
        let wf = compile_workflow(&nginx_plan());
        wf.validate().unwrap();
        let entry = wf.node("entry").unwrap();
        assert_eq!(entry.children, ["pre-stage", "fault-stage", "post-stage"]);
        let fault_stage = wf.node("fault-stage").unwrap();
        assert_eq!(fault_stage.children, ["fault-group-0"]);
        let group = wf.node("fault-group-0").unwrap();
        assert_eq!(group.template_type, TemplateType::Parallel);
        assert_eq!(group.deadline_s, 30);
        assert_eq!(group.children, ["fault-podchaos-0"]);
        let kill = wf.node("fault-podchaos-0").unwrap();
        assert_eq!(kill.template_type, TemplateType::PodChaos);
        assert_eq!(kill.deadline_s, 30);
        assert!(!wf.templates.iter().any(|n| n.template_type == TemplateType::Suspend));
    }

    #[test]
    fn offsets_become_suspend_nodes() {
        let mut plan = nginx_plan();
        plan.faults.push(pod_kill("second-kill", "nginx"));
        plan.items.push(item(Stage::Fault, fault_task("second-kill"), 10, 5));
        plan.items.push(item(Stage::Fault, vac_task("pod-availability"), 10, 20));
        let wf = compile_workflow(&plan);
        wf.validate().unwrap();
        let suspend = wf.node("fault-suspend-1").unwrap();
        assert_eq!(suspend.template_type, TemplateType::Suspend);
        assert_eq!(suspend.deadline_s, 10);
        let schedule = wf.schedule().unwrap();
        let mut got: Vec<_> = schedule.leaves.iter().map(|l| l.item.clone()).collect();
        let mut want = plan.items.clone();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn schedule_round_trips_plan_items() {
        let plan = nginx_plan();
        let schedule = compile_workflow(&plan).schedule().unwrap();
        assert_eq!(schedule.stages, [(0, 15), (15, 30), (45, 15)]);
        assert_eq!(schedule.total_s(), 60);
        let items: Vec<_> = schedule.leaves.iter().map(|l| l.item.clone()).collect();
        assert_eq!(items, plan.items);
    }

    #[test]
    fn dangling_reference_is_unsound() {
        let mut wf = compile_workflow(&nginx_plan());
        wf.templates[0].children[1] = "missing".into();
        assert!(wf.validate().is_err());
    }

    #[test]
    fn cycles_are_unsound() {
        let mut wf = compile_workflow(&nginx_plan());
        let idx = wf.templates.iter().position(|n| n.name == "pre-group-0").unwrap();
        wf.templates[idx].children.push("pre-stage".into());
        assert!(wf.validate().unwrap_err().0.contains("cycle"));
    }

    #[test]
    fn vac_payload_type_must_be_task() {
        let mut wf = compile_workflow(&nginx_plan());
        let idx = wf.templates.iter().position(|n| n.name == "pre-vac-0").unwrap();
        wf.templates[idx].template_type = TemplateType::PodChaos;
        assert!(wf.validate().is_err());
        let _ = pod_vac("x", "y");
    }

    #[test]
    fn document_has_chaos_mesh_header() {
        let doc = compile_workflow(&nginx_plan()).to_document();
        assert_eq!(doc.get("apiVersion").and_then(Node::as_str), Some(WORKFLOW_API_VERSION));
        assert_eq!(doc.get("kind").and_then(Node::as_str), Some("Workflow"));
        assert_eq!(doc.at(&["spec", "entry"]).and_then(Node::as_str), Some("entry"));
    }
}
