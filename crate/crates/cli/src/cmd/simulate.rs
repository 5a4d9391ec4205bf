use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use log::info;
use serde_json::json;

use savprobe_core::sim::{ground_truth, simulate, SimRunConfig};

use crate::error::{CliError, CliResult};
use crate::inputs;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Topology JSON.
    #[arg(long)]
    topology: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "sim.savprobe.test")]
    zone: String,
    /// Virtual probe rate.
    #[arg(long, default_value_t = 100_000.0)]
    rate: f64,
    /// Virtual seconds to listen after the last probe.
    #[arg(long, default_value_t = 5.0)]
    grace: f64,
    #[arg(long, default_value_t = 1)]
    scan_seq: u16,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: SimulateArgs) -> CliResult {
    let mut manifest = RunManifest::start("simulate");
    manifest.seed = Some(a.seed);
    manifest.zone = Some(a.zone.clone());
    let topo = inputs::topology(&a.topology, &mut manifest)?;
    topo.validate()
        .map_err(|e| CliError::parse(format!("{}: {e}", a.topology.display())))?;
    let mut cfg = SimRunConfig::new(inputs::zone(&a.zone)?, a.seed);
    cfg.rate = a.rate;
    cfg.scan_seq = a.scan_seq;
    cfg.grace = Duration::try_from_secs_f64(a.grace)
        .map_err(|_| CliError::usage("--grace must be a non-negative number"))?;
    let run = simulate(&topo, &cfg).map_err(super::plan_error)?;
    info!(
        "{} pairs, {} responses, {} auth log entries",
        run.report.pairs,
        run.responses.len(),
        run.auth_log.len()
    );

    let out = &a.out;
    std::fs::create_dir_all(out)?;
    super::write_jsonl(&out.join("responses.jsonl"), &run.responses)?;
    super::write_auth_log(&out.join("auth_log.jsonl"), &run.auth_log)?;
    super::write_json(&out.join("scan_report.json"), &run.report)?;
    super::write_json(
        &out.join("sim_stats.json"),
        &json!({ "sim": run.stats, "collector": run.collector }),
    )?;

    // inputs for a later `analyze` of this run
    let mut w = BufWriter::new(File::create(out.join("bgp.txt"))?);
    for n in &topo.networks {
        writeln!(w, "{}", n.prefix)?;
    }
    w.flush()?;
    let mut w = BufWriter::new(File::create(out.join("asn.csv"))?);
    writeln!(w, "prefix,asn")?;
    for n in topo.all_networks() {
        writeln!(w, "{},{}", n.prefix, n.asn.0)?;
    }
    w.flush()?;

    // expected /24 verdicts, valid for loss 0 and no transit filtering
    let gt = ground_truth(&topo);
    let mut w = BufWriter::new(File::create(out.join("ground_truth.csv"))?);
    writeln!(w, "slash24,verdict")?;
    for (p, v) in &gt.verdicts {
        writeln!(w, "{p},{v}")?;
    }
    w.flush()?;
    manifest.finish(out)?;
    Ok(())
}
