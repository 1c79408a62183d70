//! Chaos-Mesh-style fault specifications.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModelError};
use crate::manifest::{LabelSelector, ManifestSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    PodChaos,
    NetworkChaos,
    StressChaos,
}

impl FaultKind {
    pub fn subtypes(self) -> &'static [&'static str] {
        match self {
            FaultKind::PodChaos => &["pod-kill", "pod-failure"],
            FaultKind::NetworkChaos => &["delay", "loss"],
            FaultKind::StressChaos => &["cpu"],
        }
    }
}

/// Subtype plus its parameters. The fault kind is implied by the subtype.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "subtype", rename_all = "kebab-case")]
pub enum FaultAction {
    PodKill {
        #[serde(default)]
        grace_period_s: u32,
    },
    PodFailure,
    Delay {
        latency_ms: u32,
    },
    Loss {
        loss_pct: u32,
    },
    Cpu {
        workers: u32,
    },
}

impl FaultAction {
    pub fn kind(&self) -> FaultKind {
        match self {
            FaultAction::PodKill { .. } | FaultAction::PodFailure => FaultKind::PodChaos,
            FaultAction::Delay { .. } | FaultAction::Loss { .. } => FaultKind::NetworkChaos,
            FaultAction::Cpu { .. } => FaultKind::StressChaos,
        }
    }

    pub fn subtype(&self) -> &'static str {
        match self {
            FaultAction::PodKill { .. } => "pod-kill",
            FaultAction::PodFailure => "pod-failure",
            FaultAction::Delay { .. } => "delay",
            FaultAction::Loss { .. } => "loss",
            FaultAction::Cpu { .. } => "cpu",
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            FaultAction::PodKill { grace_period_s } if grace_period_s > 300 => {
                Err(invalid("fault", "grace_period_s must be <= 300"))
            }
            FaultAction::Delay { latency_ms } if latency_ms == 0 || latency_ms > 60_000 => {
                Err(invalid("fault", "latency_ms must lie in [1, 60000]"))
            }
            FaultAction::Loss { loss_pct } if loss_pct > 100 => {
                Err(invalid("fault", "loss_pct must lie in [0, 100]"))
            }
            FaultAction::Cpu { workers } if workers == 0 || workers > 64 => {
                Err(invalid("fault", "workers must lie in [1, 64]"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorMode {
    One,
    All,
    FixedCount(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSelector {
    #[serde(flatten)]
    pub scope: LabelSelector,
    pub mode: SelectorMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub name: String,
    pub action: FaultAction,
    pub selector: FaultSelector,
}

impl FaultSpec {
    pub fn new(name: impl Into<String>, action: FaultAction, selector: FaultSelector) -> Result<Self, ModelError> {
        let spec = FaultSpec {
            name: name.into(),
            action,
            selector,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kind(&self) -> FaultKind {
        self.action.kind()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.name.is_empty() {
            return Err(invalid("fault", "name must be non-empty"));
        }
        if self.selector.scope.labels.is_empty() {
            return Err(invalid("fault", format!("`{}` needs a non-empty label selector", self.name)));
        }
        if self.selector.mode == SelectorMode::FixedCount(0) {
            return Err(invalid("fault", "fixed_count must be >= 1"));
        }
        self.action.validate()
    }

    /// Validates params and that the selector resolves against `set`.
    pub fn validate_against(&self, set: &ManifestSet) -> Result<(), ModelError> {
        self.validate()?;
        if set.workloads_matching(&self.selector.scope).next().is_none() {
            return Err(invalid(
                "fault",
                format!("selector {} of `{}` matches no workload", self.selector.scope, self.name),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureScenario {
    pub narrative: String,
    pub faults: Vec<FaultSpec>,
}

impl FailureScenario {
    pub fn new(narrative: impl Into<String>, faults: Vec<FaultSpec>) -> Result<Self, ModelError> {
        let scenario = FailureScenario {
            narrative: narrative.into(),
            faults,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.faults.is_empty() {
            return Err(invalid("failure scenario", "needs at least one fault"));
        }
        let mut names: Vec<&str> = self.faults.iter().map(|f| f.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("failure scenario", "fault names must be unique"));
        }
        self.faults.iter().try_for_each(FaultSpec::validate)
    }

    pub fn fault(&self, name: &str) -> Option<&FaultSpec> {
        self.faults.iter().find(|f| f.name == name)
    }
}
