//! Full pipeline run with the default configuration.
//!
//! Usage: `cargo run --example pipeline [-- <output dir>]`

use quasiband::cli_io::{run_pipeline, RunConfig};
use quasiband::error::Result;

fn main() -> Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("quasiband_pipeline"));
    let report = run_pipeline(&RunConfig::default(), &out)?;
    for stage in &report.stages {
        println!("{:<14} {:?} {:?}", stage.stage.name(), stage.status, stage.outputs);
    }
    for (name, value) in &report.metrics {
        println!("{name:<28} {value:.10e}");
    }
    println!("outputs in {}", out.display());
    Ok(())
}
