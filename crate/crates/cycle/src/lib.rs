//! Chaos-engineering cycles over Kubernetes manifests: file formats, the
//! agent gateway, the four phases, and the CLI.

pub mod agents;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod gateway;
pub mod hypothesis;
pub mod improvement;
pub mod pipeline;
pub mod project;
pub mod prompts;
pub mod yaml;

pub use config::{BackendKind, CycleConfig};
pub use error::PhaseError;
pub use gateway::{Gateway, GatewayError, Prices};
pub use improvement::{ClusterProvider, SimProvider};
pub use pipeline::{run_cycle, PipelineError};
