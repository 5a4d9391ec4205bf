use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, ValueEnum};
use log::{info, warn};
use serde_json::json;

use savprobe_core::codec::TxidKey;
use savprobe_core::net::{Ip4, RoutingTable};
use savprobe_core::plan::{build_schedule, ExclusionList, Schedule, DEFAULT_RATE_PPS};
use savprobe_core::scan::{run_scan, JsonlSink, RawTransport, ScanConfig, Transport};
use savprobe_core::sim::SimNet;

use crate::error::{CliError, CliResult};
use crate::inputs;
use crate::manifest::{parent_dir, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportKind {
    /// Raw IPv4 socket on the real network (needs CAP_NET_RAW).
    Raw,
    /// Simulated internet read from --topology.
    Sim,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Routing table, one CIDR per line.
    #[arg(long)]
    bgp: PathBuf,
    /// Opt-out CIDRs, one per line. Required for real scans, may be empty.
    #[arg(long)]
    exclude: Option<PathBuf>,
    /// Zone served by the authoritative collector.
    #[arg(long)]
    zone: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Probe packets per second. Required for real scans.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, value_enum, required_unless_present = "dry_run")]
    transport: Option<TransportKind>,
    /// Simulated topology (JSON) for --transport sim.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Write the schedule as CSV to this file and send nothing.
    #[arg(long)]
    dry_run: Option<PathBuf>,
    /// Confirms the operator has cleared the scan with the affected parties.
    #[arg(long)]
    i_understand_ethics: bool,
    /// Genuine source address of the scanner. Defaults to the topology's
    /// scanner under --transport sim.
    #[arg(long)]
    scanner_ip: Option<Ip4>,
    #[arg(long, default_value_t = 33_053)]
    source_port: u16,
    /// Seconds to keep listening after the last probe.
    #[arg(long, default_value_t = 60.0)]
    grace: f64,
    /// Sequence number of this scan, encoded in every probe name.
    #[arg(long, default_value_t = 1)]
    scan_seq: u16,
    /// Skip this many schedule pairs, from an aborted run.
    #[arg(long, default_value_t = 0)]
    resume_from: u64,
    /// Output directory.
    #[arg(long, required_unless_present = "dry_run")]
    out: Option<PathBuf>,
}

pub fn run(a: ScanArgs) -> CliResult {
    let mut manifest = RunManifest::start("scan");
    manifest.seed = Some(a.seed);
    manifest.zone = Some(a.zone.clone());
    let zone = inputs::zone(&a.zone)?;
    let real = a.transport == Some(TransportKind::Raw) && a.dry_run.is_none();
    if real {
        if !a.i_understand_ethics {
            return Err(CliError::usage("real scans require --i-understand-ethics"));
        }
        if a.exclude.is_none() {
            return Err(CliError::usage(
                "real scans require --exclude (the file may be empty)",
            ));
        }
        if a.rate.is_none() {
            return Err(CliError::usage("real scans require an explicit --rate"));
        }
        if a.scanner_ip.is_none() {
            return Err(CliError::usage("real scans require --scanner-ip"));
        }
    }
    let grace = Duration::try_from_secs_f64(a.grace)
        .map_err(|_| CliError::usage("--grace must be a non-negative number"))?;
    let table = RoutingTable::aggregate(inputs::prefixes(&a.bgp, &mut manifest)?);
    if table.dropped_default_routes() > 0 {
        warn!(
            "ignored {} default route entries",
            table.dropped_default_routes()
        );
    }
    let exclusion = match &a.exclude {
        Some(p) => inputs::exclusions(p, &mut manifest)?,
        None => ExclusionList::default(),
    };
    let rate = a.rate.unwrap_or(DEFAULT_RATE_PPS);
    let schedule = build_schedule(&table, &exclusion, &zone, a.seed, rate)
        .map_err(super::plan_error)?
        .with_scan_seq(a.scan_seq);

    if let Some(csv) = &a.dry_run {
        let mut w = BufWriter::new(File::create(csv)?);
        let n = schedule.write_csv(&mut w)?;
        w.flush()?;
        info!("dry run: {n} pairs written to {}", csv.display());
        manifest.finish(parent_dir(csv))?;
        return Ok(());
    }

    let out = a
        .out
        .clone()
        .expect("clap requires --out without --dry-run");
    fs::create_dir_all(&out)?;
    let key = TxidKey::from_seed(a.seed);
    match a
        .transport
        .expect("clap requires --transport without --dry-run")
    {
        TransportKind::Raw => {
            let ip = a.scanner_ip.expect("checked above");
            let mut t = RawTransport::open(ip, a.source_port)
                .map_err(|e| CliError::transport(format!("cannot open raw transport: {e}")))?;
            execute(
                &a,
                &schedule,
                ScanConfig::new(ip, key),
                grace,
                &mut t,
                &out,
                &mut manifest,
            )
        }
        TransportKind::Sim => {
            let path = a
                .topology
                .as_ref()
                .ok_or_else(|| CliError::usage("--transport sim requires --topology"))?;
            let topo = inputs::topology(path, &mut manifest)?;
            topo.validate()
                .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
            let ip = a.scanner_ip.unwrap_or(topo.scanner_ip());
            let mut net = SimNet::new(topo, zone.clone(), a.seed);
            execute(
                &a,
                &schedule,
                ScanConfig::new(ip, key),
                grace,
                &mut net,
                &out,
                &mut manifest,
            )?;
            super::write_auth_log(&out.join("auth_log.jsonl"), &net.auth_log())?;
            manifest.finish(&out)?;
            Ok(())
        }
    }
}

fn execute<T: Transport>(
    a: &ScanArgs,
    schedule: &Schedule,
    mut cfg: ScanConfig,
    grace: Duration,
    transport: &mut T,
    out: &Path,
    manifest: &mut RunManifest,
) -> CliResult {
    cfg.source_port = a.source_port;
    cfg.grace = grace;
    cfg.resume_from = a.resume_from;
    let mut sink = JsonlSink::new(BufWriter::new(File::create(out.join("responses.jsonl"))?));
    let result = run_scan(schedule, &cfg, transport, &mut sink);
    sink.into_inner().flush()?;
    match result {
        Ok(report) => {
            info!(
                "sent {} packets, {} responses, {:.0} pps",
                report.sent, report.responses, report.rate_achieved
            );
            super::write_json(&out.join("scan_report.json"), &report)?;
            manifest.finish(out)?;
            Ok(())
        }
        Err(abort) => {
            let doc = json!({
                "report": abort.report,
                "aborted": abort.error.to_string(),
                "resume_from": abort.resume_cursor,
                "pending_unspoofed": abort.pending_unspoofed.iter().map(|p| p.target).collect::<Vec<_>>(),
            });
            super::write_json(&out.join("scan_report.json"), &doc)?;
            manifest.finish(out)?;
            Err(CliError::transport(format!(
                "{abort}; rerun with --resume-from {}",
                abort.resume_cursor
            )))
        }
    }
}
