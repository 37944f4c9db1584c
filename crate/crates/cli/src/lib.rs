//! Trace replay and mounting front end for the vfsafs model.

pub mod script;
pub mod trace;

use std::path::Path;

use anyhow::Context;
use vfsafs::FaultPlan;

pub use trace::{run_trace, ExitStatus, TraceOutcome};

/// Parses a `--faults` value: `none`, `seed:<s>,p:<prob>[,errs:A/B]` or
/// `script:<file>`, where the file holds `step=<n> err=<CODE>` lines.
pub fn parse_fault_arg(arg: &str) -> anyhow::Result<FaultPlan> {
    if let Some(file) = arg.strip_prefix("script:") {
        let text = std::fs::read_to_string(Path::new(file))
            .with_context(|| format!("reading fault script {file}"))?;
        return FaultPlan::parse_script(&text).with_context(|| format!("fault script {file}"));
    }
    arg.parse()
        .with_context(|| format!("bad fault plan `{arg}`"))
}
