//! Orchestration for the `sentiprobe` command: configuration, resumable
//! backend loops and the ingest/sat/sst/analyze stages.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{BackendKind, Overrides, RunConfig};
pub use error::CliError;
pub use pipeline::{build_backend, run_all, run_analyze, run_ingest, run_sat, run_sst};
