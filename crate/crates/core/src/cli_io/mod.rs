//! Pipeline orchestration driven by a TOML configuration, with stamped artifact output.

pub mod config;
pub mod output;
pub mod pipeline;
pub mod verify;

pub use config::{RunConfig, SelfEnergySpec, Stage};
pub use output::{emit_band_plot, Stamp, VERSION};
pub use pipeline::{run_pipeline, run_stages, RunReport, StageRecord, StageStatus};
pub use verify::{run_invariant_suite, VerifyReport};
