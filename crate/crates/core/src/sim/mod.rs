//! Simulated internet with known filtering policies, used as the oracle for
//! end-to-end tests.

mod net;
mod topology;
mod truth;

pub use net::{DropReason, SimNet, SimStats, TraceEvent, HOP_DELAY};
pub use topology::{ResolverMode, Scope, SimNetwork, SimResolver, SimTopology, TopologyError};
pub use truth::{ground_truth, GroundTruth};

use std::time::Duration;

use crate::codec::{DnsName, TxidKey};
use crate::collector::{CollectorStats, LogEntry};
use crate::net::RoutingTable;
use crate::plan::{build_schedule, ExclusionList, PlanError};
use crate::scan::{run_scan, ScanConfig, ScanResponse, ScanRunReport};

#[derive(Debug, Clone)]
pub struct SimRunConfig {
    pub zone: DnsName,
    pub seed: u64,
    /// Probe rate in virtual packets per second.
    pub rate: f64,
    pub scan_seq: u16,
    pub grace: Duration,
    pub trace: bool,
    /// Restricts the scan to these prefixes, e.g. for re-scanning
    /// inconsistent /24s. Defaults to every network.
    pub targets: Option<RoutingTable>,
}

impl SimRunConfig {
    pub fn new(zone: DnsName, seed: u64) -> Self {
        SimRunConfig {
            zone,
            seed,
            rate: 100_000.0,
            scan_seq: 1,
            grace: Duration::from_secs(5),
            trace: false,
            targets: None,
        }
    }
}

/// Outputs of one simulated scan.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub responses: Vec<ScanResponse>,
    pub auth_log: Vec<LogEntry>,
    pub report: ScanRunReport,
    pub collector: CollectorStats,
    pub stats: SimStats,
    pub trace: Vec<TraceEvent>,
}

/// Scans the networks of `topo` (or `cfg.targets`) through a fresh [`SimNet`].
pub fn simulate(topo: &SimTopology, cfg: &SimRunConfig) -> Result<SimRun, PlanError> {
    let table = match &cfg.targets {
        Some(t) => RoutingTable::aggregate(t.entries().iter().copied()),
        None => RoutingTable::aggregate(topo.routing_table().entries().iter().copied()),
    };
    let schedule = build_schedule(
        &table,
        &ExclusionList::default(),
        &cfg.zone,
        cfg.seed,
        cfg.rate,
    )?
    .with_scan_seq(cfg.scan_seq);
    let mut net = SimNet::new(topo.clone(), cfg.zone.clone(), cfg.seed);
    if cfg.trace {
        net = net.with_trace();
    }
    let mut sc = ScanConfig::new(topo.scanner_ip(), TxidKey::from_seed(cfg.seed));
    sc.grace = cfg.grace;
    let mut responses = Vec::new();
    let report = run_scan(&schedule, &sc, &mut net, &mut responses)
        .expect("simulated transport does not fail");
    Ok(SimRun {
        responses,
        auth_log: net.auth_log(),
        report,
        collector: net.collector_stats(),
        stats: net.stats().clone(),
        trace: net.trace().to_vec(),
    })
}
