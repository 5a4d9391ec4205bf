use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use log::info;

use savprobe_core::inference::{Granularity, VerdictSet};
use savprobe_core::net::{Ip4, RoutingTable};
use savprobe_core::report::{country_stats, emit_reports, read_verdicts, size_distributions};

use crate::error::{CliError, CliResult};
use crate::inputs;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding verdicts_{slash24,prefix,asn}.csv from `analyze`.
    #[arg(long)]
    verdicts: PathBuf,
    /// `start_ip,end_ip,country` CSV.
    #[arg(long)]
    geo: PathBuf,
    /// `prefix,asn` CSV, for AS sizes.
    #[arg(long)]
    asn: PathBuf,
    /// Routing table whose /24s form the per-country totals.
    #[arg(long)]
    bgp: PathBuf,
    /// `ip,...` CSV of resolvers to count per country. Defaults to
    /// resolvers.csv in the verdicts directory when present.
    #[arg(long)]
    resolvers: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn load_verdicts(a: &ReportArgs, g: Granularity, m: &mut RunManifest) -> CliResult<VerdictSet> {
    let path = a.verdicts.join(format!("verdicts_{}.csv", g.name()));
    let bytes = inputs::read(&path, m)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::parse(format!("{}: not UTF-8", path.display())))?;
    read_verdicts(&text, g).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn load_resolvers(path: &Path, m: &mut RunManifest) -> CliResult<Vec<Ip4>> {
    let bytes = inputs::read(path, m)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::parse(format!("{}: not UTF-8", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || (i == 0 && field == "ip") {
            continue;
        }
        out.push(
            field
                .parse()
                .map_err(|e| CliError::parse(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

pub fn run(a: ReportArgs) -> CliResult {
    let mut manifest = RunManifest::start("report");
    let [s24, pre, asn_v] = [Granularity::Slash24, Granularity::Prefix, Granularity::Asn];
    let s24 = load_verdicts(&a, s24, &mut manifest)?;
    let pre = load_verdicts(&a, pre, &mut manifest)?;
    let asn_v = load_verdicts(&a, asn_v, &mut manifest)?;
    let geo = inputs::geo_map(&a.geo, &mut manifest)?;
    let asn = inputs::asn_map(&a.asn, &mut manifest)?;
    let universe = RoutingTable::aggregate(inputs::prefixes(&a.bgp, &mut manifest)?);
    let default_resolvers = a.verdicts.join("resolvers.csv");
    let resolvers = match &a.resolvers {
        Some(p) => load_resolvers(p, &mut manifest)?,
        None if fs::metadata(&default_resolvers).is_ok() => {
            load_resolvers(&default_resolvers, &mut manifest)?
        }
        None => Vec::new(),
    };
    let countries = country_stats(&s24, &geo, &universe, &resolvers);
    let sizes = size_distributions(&asn_v, &pre, &asn);
    emit_reports(&a.out, &countries, &sizes, &[&s24, &pre, &asn_v])?;
    info!(
        "{} countries, {} tied /24s, {} /24s without location",
        countries.stats.len(),
        countries.ties,
        countries.unassigned
    );
    manifest.finish(&a.out)?;
    Ok(())
}
