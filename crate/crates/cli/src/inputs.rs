//! Reading command inputs, with missing files mapped to usage errors and
//! malformed contents to parse errors.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use log::warn;
use savprobe_core::codec::DnsName;
use savprobe_core::collector::{read_log, LogEntry};
use savprobe_core::inference::{parse_spoofer_csv, SpooferState};
use savprobe_core::net::{parse_prefix_lines, AsnMap, GeoMap, Prefix};
use savprobe_core::plan::ExclusionList;
use savprobe_core::scan::{read_responses, ScanResponse};
use savprobe_core::sim::SimTopology;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub fn read(path: &Path, manifest: &mut RunManifest) -> CliResult<Vec<u8>> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    manifest.input(path, &bytes);
    Ok(bytes)
}

fn text(path: &Path, manifest: &mut RunManifest) -> CliResult<String> {
    String::from_utf8(read(path, manifest)?)
        .map_err(|_| CliError::parse(format!("{}: not UTF-8", path.display())))
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::parse(format!("{}: {e}", path.display()))
}

pub fn zone(s: &str) -> CliResult<DnsName> {
    s.parse()
        .map_err(|e| CliError::usage(format!("bad zone {s:?}: {e}")))
}

pub fn prefixes(path: &Path, m: &mut RunManifest) -> CliResult<Vec<Prefix>> {
    parse_prefix_lines(&text(path, m)?).map_err(|e| parse_err(path, e))
}

pub fn exclusions(path: &Path, m: &mut RunManifest) -> CliResult<ExclusionList> {
    ExclusionList::parse(&text(path, m)?).map_err(|e| parse_err(path, e))
}

pub fn asn_map(path: &Path, m: &mut RunManifest) -> CliResult<AsnMap> {
    AsnMap::parse_csv(&text(path, m)?).map_err(|e| parse_err(path, e))
}

pub fn geo_map(path: &Path, m: &mut RunManifest) -> CliResult<GeoMap> {
    GeoMap::parse_csv(&text(path, m)?).map_err(|e| parse_err(path, e))
}

pub fn spoofer(path: &Path, m: &mut RunManifest) -> CliResult<Vec<SpooferState>> {
    parse_spoofer_csv(&text(path, m)?).map_err(|e| parse_err(path, e))
}

pub fn topology(path: &Path, m: &mut RunManifest) -> CliResult<SimTopology> {
    SimTopology::from_json(&text(path, m)?).map_err(|e| parse_err(path, e))
}

/// Auth log entries; torn or garbled lines are skipped with a warning.
pub fn auth_log(path: &Path, m: &mut RunManifest) -> CliResult<Vec<LogEntry>> {
    let (entries, bad) = read_log(Cursor::new(read(path, m)?))?;
    if bad > 0 {
        warn!("{}: skipped {bad} unreadable lines", path.display());
    }
    Ok(entries)
}

pub fn responses(path: &Path, m: &mut RunManifest) -> CliResult<Vec<ScanResponse>> {
    let (rs, bad) = read_responses(Cursor::new(read(path, m)?))?;
    if bad > 0 {
        warn!("{}: skipped {bad} unreadable lines", path.display());
    }
    Ok(rs)
}
