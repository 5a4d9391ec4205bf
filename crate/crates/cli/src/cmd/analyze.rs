use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use log::{info, warn};
use serde_json::json;

use savprobe_core::inference::{analyze, AnalysisInput, Outbound, Verdict};
use savprobe_core::net::{AsnMap, Ip4, RoutingTable};
use savprobe_core::report::write_verdicts;

use crate::error::CliResult;
use crate::inputs;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    zone: String,
    /// Collector log (JSONL). Repeat to merge several runs.
    #[arg(long = "auth-log", required = true)]
    auth_log: Vec<PathBuf>,
    /// Scanner response sink (JSONL). Repeat to merge several runs.
    #[arg(long = "scan-sink", required = true)]
    scan_sink: Vec<PathBuf>,
    /// Routing table, one CIDR per line, not aggregated.
    #[arg(long)]
    bgp: PathBuf,
    /// `prefix,asn` CSV.
    #[arg(long)]
    asn: Option<PathBuf>,
    /// Spoofer-style `slash24,state,timestamp` CSV.
    #[arg(long)]
    spoofer: Option<PathBuf>,
    /// Scanner address, enabling misbehaving-forwarder detection.
    #[arg(long)]
    scanner_ip: Option<Ip4>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: AnalyzeArgs) -> CliResult {
    let mut manifest = RunManifest::start("analyze");
    manifest.zone = Some(a.zone.clone());
    let zone = inputs::zone(&a.zone)?;
    let mut auth_log = Vec::new();
    for p in &a.auth_log {
        auth_log.extend(inputs::auth_log(p, &mut manifest)?);
    }
    let mut responses = Vec::new();
    for p in &a.scan_sink {
        responses.extend(inputs::responses(p, &mut manifest)?);
    }
    let table = RoutingTable::from_prefixes(inputs::prefixes(&a.bgp, &mut manifest)?);
    let asn = match &a.asn {
        Some(p) => inputs::asn_map(p, &mut manifest)?,
        None => AsnMap::default(),
    };
    if a.scanner_ip.is_some() && a.asn.is_none() {
        warn!("--scanner-ip without --asn: forwarders cannot be attributed to ASes");
    }
    let spoofer = match &a.spoofer {
        Some(p) => inputs::spoofer(p, &mut manifest)?,
        None => Vec::new(),
    };
    let an = analyze(&AnalysisInput {
        zone: &zone,
        auth_log: &auth_log,
        responses: &responses,
        table: &table,
        asn: &asn,
        scanner_ip: a.scanner_ip,
        spoofer: &spoofer,
    });

    let out = &a.out;
    std::fs::create_dir_all(out)?;
    for set in an.verdict_sets() {
        write_verdicts(out, set)?;
    }

    let mut w = BufWriter::new(File::create(out.join("resolvers.csv"))?);
    writeln!(w, "ip,proxy,openness")?;
    for r in &an.resolvers {
        let proxy = serde_json::to_value(r.proxy)?;
        let open = serde_json::to_value(r.openness)?;
        writeln!(
            w,
            "{},{},{}",
            r.ip,
            proxy.as_str().unwrap_or_default(),
            open.as_str().unwrap_or_default()
        )?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(out.join("outbound.csv"))?);
    writeln!(w, "slash24,outbound")?;
    for (p, o) in &an.outbound.map {
        let o = match o {
            Outbound::Vuln => "vuln",
            Outbound::Filtered => "filtered",
        };
        writeln!(w, "{p},{o}")?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(out.join("misbehaving_forwarders.csv"))?);
    writeln!(w, "forwarder,responder")?;
    for (f, r) in &an.forwarders.misbehaving {
        writeln!(w, "{f},{r}")?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(out.join("quarantine.jsonl"))?);
    for (e, reason) in &an.quarantine.entries {
        serde_json::to_writer(
            &mut w,
            &json!({ "src": e.src, "name": e.name, "ts": e.ts, "reason": reason }),
        )?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let quarantine: BTreeMap<String, u64> = an
        .quarantine
        .counts
        .iter()
        .map(|(r, n)| {
            (
                serde_json::to_value(r)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
                *n,
            )
        })
        .collect();
    let counts = |set: &savprobe_core::inference::VerdictSet| {
        json!({
            "S": set.count(Verdict::S),
            "NS": set.count(Verdict::NS),
            "I": set.count(Verdict::I),
            "unmapped": set.unmapped,
        })
    };
    super::write_json(&out.join("cross_tab.json"), &an.cross_tab)?;
    super::write_json(
        &out.join("analysis_summary.json"),
        &json!({
            "auth_log_entries": auth_log.len(),
            "responses": responses.len(),
            "unique_observations": an.observations.len(),
            "quarantined": an.quarantine.len(),
            "quarantine_by_reason": quarantine,
            "open_resolvers": an.evidence.open.len(),
            "vulnerable_resolvers": an.evidence.vulnerable.len(),
            "resolvers": an.resolver_summary,
            "verdicts": {
                "slash24": counts(&an.slash24),
                "prefix": counts(&an.prefix),
                "asn": counts(&an.asn),
            },
            "forwarders": {
                "misbehaving": an.forwarders.misbehaving.len(),
                "nat": an.forwarders.nat.len(),
                "same_as": an.forwarders.same_as.len(),
                "unknown_as": an.forwarders.unknown_as.len(),
            },
            "outbound": {
                "slash24s": an.outbound.map.len(),
                "conflicts": an.outbound.conflicts,
                "excluded": an.outbound.excluded,
            },
        }),
    )?;
    info!(
        "/24 verdicts: {} S, {} NS, {} I; {} names quarantined",
        an.slash24.count(Verdict::S),
        an.slash24.count(Verdict::NS),
        an.slash24.count(Verdict::I),
        an.quarantine.len()
    );
    manifest.finish(out)?;
    Ok(())
}
