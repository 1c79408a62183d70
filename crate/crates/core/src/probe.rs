//! Probes, measurements, and thresholds: the measurable half of a steady state.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModelError};
use crate::manifest::{LabelSelector, DEFAULT_NAMESPACE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterQuantity {
    PodCount,
    ReadyReplicaCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HttpQuantity {
    SuccessRate,
    LatencyP95Ms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    PodCount,
    ReadyReplicaCount,
    SuccessRate,
    LatencyP95Ms,
}

impl Quantity {
    pub fn unit(self) -> &'static str {
        match self {
            Quantity::PodCount | Quantity::ReadyReplicaCount => "count",
            Quantity::SuccessRate => "ratio",
            Quantity::LatencyP95Ms => "ms",
        }
    }

    /// Checks that `value` is expressible in this quantity's unit.
    pub fn check_value(self, value: f64) -> Result<(), String> {
        if !value.is_finite() {
            return Err(format!("{value} is not finite"));
        }
        match self {
            Quantity::PodCount | Quantity::ReadyReplicaCount => {
                if value < 0.0 || value != (value as i64) as f64 {
                    return Err(format!("count threshold must be a non-negative integer, got {value}"));
                }
            }
            Quantity::SuccessRate => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(format!("ratio threshold must lie in [0, 1], got {value}"));
                }
            }
            Quantity::LatencyP95Ms => {
                if value < 0.0 {
                    return Err(format!("latency threshold must be >= 0 ms, got {value}"));
                }
            }
        }
        Ok(())
    }
}

/// What a probe inspects, and through which tool.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "tool", rename_all = "snake_case")]
pub enum ProbeTarget {
    ClusterApi {
        #[serde(default = "default_namespace")]
        namespace: String,
        labels: crate::manifest::Labels,
        quantity: ClusterQuantity,
    },
    HttpLoad {
        url: String,
        virtual_users: u32,
        quantity: HttpQuantity,
    },
}

fn default_namespace() -> String {
    DEFAULT_NAMESPACE.into()
}

impl ProbeTarget {
    pub fn quantity(&self) -> Quantity {
        match self {
            ProbeTarget::ClusterApi { quantity, .. } => match quantity {
                ClusterQuantity::PodCount => Quantity::PodCount,
                ClusterQuantity::ReadyReplicaCount => Quantity::ReadyReplicaCount,
            },
            ProbeTarget::HttpLoad { quantity, .. } => match quantity {
                HttpQuantity::SuccessRate => Quantity::SuccessRate,
                HttpQuantity::LatencyP95Ms => Quantity::LatencyP95Ms,
            },
        }
    }

    pub fn tool_name(&self) -> &'static str {
        match self {
            ProbeTarget::ClusterApi { .. } => "cluster_api",
            ProbeTarget::HttpLoad { .. } => "http_load",
        }
    }

    pub fn selector(&self) -> Option<LabelSelector> {
        match self {
            ProbeTarget::ClusterApi { namespace, labels, .. } => Some(LabelSelector {
                namespace: namespace.clone(),
                labels: labels.clone(),
            }),
            ProbeTarget::HttpLoad { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub target: ProbeTarget,
    pub sample_interval_s: u32,
    pub duration_s: u32,
}

impl ProbeSpec {
    pub fn new(target: ProbeTarget, sample_interval_s: u32, duration_s: u32) -> Result<Self, ModelError> {
        let probe = ProbeSpec {
            target,
            sample_interval_s,
            duration_s,
        };
        probe.validate()?;
        Ok(probe)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.sample_interval_s == 0 {
            return Err(invalid("probe", "sample_interval_s must be positive"));
        }
        if self.duration_s < self.sample_interval_s {
            return Err(invalid("probe", "duration_s must be >= sample_interval_s"));
        }
        match &self.target {
            ProbeTarget::ClusterApi { labels, namespace, .. } => {
                if labels.is_empty() {
                    return Err(invalid("probe", "cluster probe needs a non-empty label selector"));
                }
                if namespace.is_empty() || labels.keys().any(String::is_empty) {
                    return Err(invalid("probe", "empty namespace or label key"));
                }
            }
            ProbeTarget::HttpLoad { url, virtual_users, .. } => {
                if *virtual_users == 0 {
                    return Err(invalid("probe", "virtual_users must be >= 1"));
                }
                if parse_service_url(url).is_none() {
                    return Err(invalid("probe", format!("unsupported URL `{url}`")));
                }
            }
        }
        Ok(())
    }

    pub fn quantity(&self) -> Quantity {
        self.target.quantity()
    }

    /// The same probe with its duration capped at `max_s`.
    pub fn shortened(&self, max_s: u32) -> ProbeSpec {
        let duration_s = self.duration_s.min(max_s).max(self.sample_interval_s);
        ProbeSpec {
            duration_s,
            ..self.clone()
        }
    }
}

/// Resolves `http://<service>[.<namespace>[.svc...]][:port][/path]` to
/// `(namespace, service)`.
pub fn parse_service_url(url: &str) -> Option<(String, String)> {
    let rest = url
        .strip_prefix("http://")
        .or_else(|| url.strip_prefix("https://"))?;
    let authority = rest.split('/').next()?;
    let host = authority.split(':').next()?;
    if host.is_empty() {
        return None;
    }
    let mut labels = host.split('.');
    let service = labels.next()?;
    let namespace = labels.next().filter(|n| !n.is_empty()).unwrap_or(DEFAULT_NAMESPACE);
    if service.is_empty() {
        return None;
    }
    Some((namespace.into(), service.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Eq,
    Ge,
    Le,
    Lt,
    Gt,
}

impl Comparator {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparator::Eq => value == bound,
            Comparator::Ge => value >= bound,
            Comparator::Le => value <= bound,
            Comparator::Lt => value < bound,
            Comparator::Gt => value > bound,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "==",
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
            Comparator::Lt => "<",
            Comparator::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    EverySample,
    FinalSample,
    P95,
}

impl Aggregation {
    /// Aggregates a non-empty sample series. `EverySample` reduces to the
    /// minimum; thresholds under `EverySample` are still checked per sample.
    pub fn apply(self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        Some(match self {
            Aggregation::EverySample => values.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregation::FinalSample => values[values.len() - 1],
            Aggregation::P95 => percentile_95(values),
        })
    }
}

/// Nearest-rank 95th percentile of a non-empty series.
pub fn percentile_95(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (95 * n).div_ceil(100).max(1);
    sorted[rank - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub offset_s: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub samples: Vec<Sample>,
    pub aggregation: Aggregation,
    pub aggregate: f64,
}

impl Measurement {
    pub fn from_samples(samples: Vec<Sample>, aggregation: Aggregation) -> Result<Self, ModelError> {
        if samples.is_empty() {
            return Err(invalid("measurement", "no samples"));
        }
        if samples.windows(2).any(|w| w[0].offset_s >= w[1].offset_s) {
            return Err(invalid("measurement", "sample offsets must be strictly increasing"));
        }
        let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
        let aggregate = aggregation.apply(&values).unwrap_or(f64::NAN);
        Ok(Measurement {
            samples,
            aggregation,
            aggregate,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }

    /// Recomputes the aggregate under a different aggregation.
    pub fn reaggregate(&self, aggregation: Aggregation) -> Measurement {
        Measurement::from_samples(self.samples.clone(), aggregation)
            .expect("samples were validated at construction")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let recomputed = Measurement::from_samples(self.samples.clone(), self.aggregation)?;
        if recomputed.aggregate.to_bits() != self.aggregate.to_bits() {
            return Err(invalid("measurement", "aggregate does not match samples"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub comparator: Comparator,
    pub value: f64,
    pub aggregation: Aggregation,
}

impl Threshold {
    pub fn new(comparator: Comparator, value: f64, aggregation: Aggregation) -> Self {
        Threshold {
            comparator,
            value,
            aggregation,
        }
    }

    pub fn validate_for(&self, quantity: Quantity) -> Result<(), ModelError> {
        quantity
            .check_value(self.value)
            .map_err(|reason| invalid("threshold", reason))
    }

    /// Under `EverySample`, every sample must satisfy the bound; otherwise the
    /// aggregate (recomputed with this threshold's aggregation) must.
    pub fn evaluate(&self, measurement: &Measurement) -> bool {
        match self.aggregation {
            Aggregation::EverySample => {
                !measurement.samples.is_empty()
                    && measurement
                        .samples
                        .iter()
                        .all(|s| self.comparator.holds(s.value, self.value))
            }
            agg => agg
                .apply(&measurement.values())
                .is_some_and(|v| self.comparator.holds(v, self.value)),
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let agg = match self.aggregation {
            Aggregation::EverySample => "every sample",
            Aggregation::FinalSample => "final sample",
            Aggregation::P95 => "p95",
        };
        write!(f, "{} {} {}", agg, self.comparator.symbol(), self.value)
    }
}
