pub mod analyze;
pub mod report;
pub mod scan;
pub mod serve;
pub mod simulate;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use savprobe_core::collector::LogEntry;
use savprobe_core::plan::PlanError;

use crate::error::{CliError, CliResult};

/// Bad zone or rate is the operator's mistake; an empty target set is a
/// problem with the input files.
pub fn plan_error(e: PlanError) -> CliError {
    match e {
        PlanError::Codec(_) | PlanError::BadRate(_) => CliError::usage(e),
        PlanError::EmptyTargets | PlanError::NotAggregated => CliError::parse(e),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> CliResult {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_auth_log(path: &Path, entries: &[LogEntry]) -> CliResult {
    write_jsonl(path, entries)
}
