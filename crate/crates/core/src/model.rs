//! Hypothesis, context, analysis, and reconfiguration types.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::ToString;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModelError};
use crate::fault::FailureScenario;
use crate::manifest::ManifestSet;
use crate::probe::{Measurement, ProbeSpec, Threshold};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
}

/// Raw user input for one cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectInput {
    pub manifests: Vec<SourceFile>,
    pub deploy_config_path: String,
    pub deploy_config: String,
    #[serde(default)]
    pub instructions: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceSummary {
    pub resource: String,
    pub summary: String,
}

/// Implicit context filled in before the hypothesis phase.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProcessedContext {
    pub summaries: Vec<ResourceSummary>,
    pub potential_issues: Vec<String>,
    pub application_guess: String,
    pub sanitized_instructions: String,
    pub rejection: Option<String>,
}

impl ProcessedContext {
    pub fn rejected(reason: impl Into<String>) -> Self {
        ProcessedContext {
            rejection: Some(reason.into()),
            ..Default::default()
        }
    }

    pub fn validate(&self, set: &ManifestSet) -> Result<(), ModelError> {
        if self.rejection.is_some() {
            let empty = self.summaries.is_empty()
                && self.potential_issues.is_empty()
                && self.application_guess.is_empty()
                && self.sanitized_instructions.is_empty();
            return if empty {
                Ok(())
            } else {
                Err(invalid("context", "a rejected context carries no other fields"))
            };
        }
        let expected: Vec<String> = set.resources().map(|r| r.id().to_string()).collect();
        let got: Vec<&str> = self.summaries.iter().map(|s| s.resource.as_str()).collect();
        if expected.len() != got.len() || expected.iter().zip(&got).any(|(a, b)| a != b) {
            return Err(invalid(
                "context",
                format!("expected one summary per resource in order {expected:?}, got {got:?}"),
            ));
        }
        Ok(())
    }
}

/// Validation-as-code: the executable check of one steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaCSpec {
    pub steady_state_name: String,
    pub probe: ProbeSpec,
    pub threshold: Threshold,
    /// Generated probe script, kept verbatim and never interpreted.
    #[serde(default)]
    pub script_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub name: String,
    pub description: String,
    pub probe: ProbeSpec,
    pub baseline: Measurement,
    pub threshold: Threshold,
    pub vac: VaCSpec,
}

impl SteadyState {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        probe: ProbeSpec,
        baseline: Measurement,
        threshold: Threshold,
        vac: VaCSpec,
    ) -> Result<Self, ModelError> {
        let state = SteadyState {
            name: name.into(),
            description: description.into(),
            probe,
            baseline,
            threshold,
            vac,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.name.is_empty() {
            return Err(invalid("steady state", "name must be non-empty"));
        }
        self.probe.validate()?;
        self.baseline.validate()?;
        self.threshold.validate_for(self.probe.quantity())?;
        if self.baseline.aggregation != self.threshold.aggregation {
            return Err(invalid("steady state", "baseline aggregation differs from threshold"));
        }
        if !self.threshold.evaluate(&self.baseline) {
            return Err(invalid(
                "steady state",
                format!("`{}`: threshold {} fails against its own baseline", self.name, self.threshold),
            ));
        }
        if self.vac.steady_state_name != self.name
            || self.vac.probe != self.probe
            || self.vac.threshold != self.threshold
        {
            return Err(invalid("steady state", format!("`{}`: VaC does not mirror probe and threshold", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub steady_states: Vec<SteadyState>,
    pub scenario: FailureScenario,
    pub statement: String,
}

impl Hypothesis {
    /// Builds the hypothesis with its canonical statement.
    pub fn new(steady_states: Vec<SteadyState>, scenario: FailureScenario) -> Result<Self, ModelError> {
        let names: Vec<&str> = steady_states.iter().map(|s| s.name.as_str()).collect();
        let statement = format!(
            "All VaC checks ({}) pass even while the faults of the scenario \"{}\" are injected.",
            names.join(", "),
            scenario.narrative
        );
        let hypothesis = Hypothesis {
            steady_states,
            scenario,
            statement,
        };
        hypothesis.validate()?;
        Ok(hypothesis)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.steady_states.is_empty() {
            return Err(invalid("hypothesis", "needs at least one steady state"));
        }
        let mut names = BTreeSet::new();
        for state in &self.steady_states {
            state.validate()?;
            if !names.insert(state.name.as_str()) {
                return Err(invalid("hypothesis", format!("duplicate steady state `{}`", state.name)));
            }
            if !self.statement.contains(state.name.as_str()) {
                return Err(invalid("hypothesis", format!("statement omits `{}`", state.name)));
            }
        }
        self.scenario.validate()
    }

    pub fn steady_state(&self, name: &str) -> Option<&SteadyState> {
        self.steady_states.iter().find(|s| s.name == name)
    }

    pub fn vacs(&self) -> Vec<VaCSpec> {
        self.steady_states.iter().map(|s| s.vac.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub failed_items: Vec<String>,
    pub causes: Vec<String>,
    pub countermeasures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ReconfigOp {
    Replace { path: String, text: String },
    Create { path: String, text: String },
    Delete { path: String },
}

impl ReconfigOp {
    pub fn path(&self) -> &str {
        match self {
            ReconfigOp::Replace { path, .. } | ReconfigOp::Create { path, .. } | ReconfigOp::Delete { path } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Reconfiguration {
    pub ops: Vec<ReconfigOp>,
    pub rationale: String,
}

impl Reconfiguration {
    /// Checks op paths against `set`: Replace/Delete targets exist, Create
    /// targets do not, and no path is touched twice.
    pub fn validate_paths(&self, set: &ManifestSet) -> Result<(), ModelError> {
        let mut seen = BTreeSet::new();
        for op in &self.ops {
            if !seen.insert(op.path()) {
                return Err(invalid("reconfiguration", format!("path `{}` touched twice", op.path())));
            }
            let exists = set.contains_path(op.path());
            match op {
                ReconfigOp::Replace { .. } | ReconfigOp::Delete { .. } if !exists => {
                    return Err(invalid("reconfiguration", format!("path `{}` not found", op.path())));
                }
                ReconfigOp::Create { .. } if exists => {
                    return Err(invalid("reconfiguration", format!("path `{}` already exists", op.path())));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CycleOutcome {
    SatisfiedNoChange,
    SatisfiedAfterImprovement { loops: u32 },
    Aborted { reason: String },
}

impl CycleOutcome {
    pub fn is_satisfied(&self) -> bool {
        !matches!(self, CycleOutcome::Aborted { .. })
    }
}

impl fmt::Display for CycleOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CycleOutcome::SatisfiedNoChange => f.write_str("SatisfiedNoChange"),
            CycleOutcome::SatisfiedAfterImprovement { loops } => write!(f, "SatisfiedAfterImprovement({loops})"),
            CycleOutcome::Aborted { reason } => write!(f, "Aborted({reason})"),
        }
    }
}
