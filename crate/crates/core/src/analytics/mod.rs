//! Batch-level tooling on top of the episode engine: run manifests,
//! under-reach maps, labeled datasets and the line-delimited JSON server.

mod dataset;
mod manifest;
mod serve;
mod underreach;

use thiserror::Error;

pub use dataset::{
    build_dataset, label_for, write_class_counts, write_dataset_csv, Dataset, DatasetConfig, DatasetRow, Granularity,
};
pub use manifest::{build_agents, conventional_specs, load_environment, RunManifest};
pub use serve::{serve_stream, serve_tcp, Session, PROTOCOL_VERSION};
pub use underreach::{substation_devices, underreach_map, BusReach, ReachFlag, UnderreachConfig, UnderreachMap};

/// Failure classes with stable process exit codes.
#[derive(Debug, Error)]
pub enum AnalyticsError {
    /// Bad input files, settings or arguments.
    #[error("{0}")]
    Input(String),
    /// A solve diverged or an episode could not run.
    #[error("{0}")]
    Runtime(String),
    /// The peer broke the wire protocol or the stream failed.
    #[error("{0}")]
    Protocol(String),
}

impl AnalyticsError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AnalyticsError::Input(_) => 1,
            AnalyticsError::Runtime(_) => 2,
            AnalyticsError::Protocol(_) => 3,
        }
    }
}
