use std::net::{SocketAddr, UdpSocket};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use clap::Args;
use log::info;

use savprobe_core::collector::{serve, AuthCollector, CollectorConfig, JsonlLog};
use savprobe_core::net::Ip4;

use crate::error::{CliError, CliResult};
use crate::inputs;
use crate::manifest::{parent_dir, RunManifest};

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Zone to answer for.
    #[arg(long)]
    zone: String,
    /// Address returned for every A query in the zone.
    #[arg(long)]
    answer: Ip4,
    /// JSONL query log, appended to.
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value = "0.0.0.0:53")]
    bind: SocketAddr,
    #[arg(long, default_value_t = 60)]
    ttl: u32,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Stop after this many seconds instead of running until killed.
    #[arg(long)]
    duration: Option<f64>,
}

pub fn run(a: ServeArgs) -> CliResult {
    let mut manifest = RunManifest::start("serve");
    manifest.zone = Some(a.zone.clone());
    let mut cfg = CollectorConfig::new(inputs::zone(&a.zone)?, a.answer);
    cfg.ttl = a.ttl;
    let duration = a
        .duration
        .map(|d| {
            Duration::try_from_secs_f64(d)
                .map_err(|_| CliError::usage("--duration must be a non-negative number"))
        })
        .transpose()?;
    let socket = UdpSocket::bind(a.bind)
        .map_err(|e| CliError::transport(format!("cannot bind {}: {e}", a.bind)))?;
    let log = JsonlLog::open(&a.log)?;
    let collector = AuthCollector::new(cfg);
    let stop = AtomicBool::new(false);
    info!("serving {} on {}", a.zone, socket.local_addr()?);
    std::thread::scope(|s| {
        if let Some(d) = duration {
            let stop = &stop;
            s.spawn(move || {
                std::thread::sleep(d);
                stop.store(true, Ordering::Relaxed);
            });
        }
        serve(&socket, &collector, &log, a.workers, &stop)
    })
    .map_err(|e| CliError::transport(format!("collector socket failed: {e}")))?;
    log.flush()?;
    let stats = collector.stats();
    info!(
        "served {} queries, logged {}, refused {}, malformed {}",
        stats.served, stats.logged, stats.refused, stats.malformed
    );
    manifest.finish(parent_dir(&a.log))?;
    Ok(())
}
