use crate::codec::DnsName;
use crate::collector::{decode_log, dedup, LogEntry, Quarantine, QueryObservation};
use crate::net::{AsnMap, Ip4, RoutingTable};
use crate::scan::{detect_misbehaving_forwarders, detect_open, ForwarderFindings, ScanResponse};

use super::{
    cross_tab, inbound_evidence, ingest_spoofer, outbound_verdicts, resolver_records, verdicts,
    DirectionCrossTab, Granularity, OutboundMap, ResolverRecord, ResolverSummary, ScanEvidence,
    SpooferState, VerdictSet,
};

/// Everything `analyze` reads. Logs and sinks from several runs may be
/// concatenated; evidence from them accumulates.
pub struct AnalysisInput<'a> {
    pub zone: &'a DnsName,
    pub auth_log: &'a [LogEntry],
    pub responses: &'a [ScanResponse],
    /// Un-aggregated routing table, for longest-prefix units.
    pub table: &'a RoutingTable,
    pub asn: &'a AsnMap,
    /// Needed for misbehaving-forwarder detection.
    pub scanner_ip: Option<Ip4>,
    pub spoofer: &'a [SpooferState],
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub observations: Vec<QueryObservation>,
    pub quarantine: Quarantine,
    pub evidence: ScanEvidence,
    pub resolvers: Vec<ResolverRecord>,
    pub resolver_summary: ResolverSummary,
    pub slash24: VerdictSet,
    pub prefix: VerdictSet,
    pub asn: VerdictSet,
    pub forwarders: ForwarderFindings,
    pub outbound: OutboundMap,
    pub cross_tab: DirectionCrossTab,
}

impl Analysis {
    pub fn verdict_sets(&self) -> [&VerdictSet; 3] {
        [&self.slash24, &self.prefix, &self.asn]
    }
}

pub fn analyze(input: &AnalysisInput<'_>) -> Analysis {
    let (obs, quarantine) = decode_log(input.auth_log, input.zone);
    let observations = dedup(&obs);
    let open = detect_open(input.responses, input.zone);
    let evidence = inbound_evidence(&observations, &open);
    let (resolvers, resolver_summary) = resolver_records(&observations, &open);
    let v = |g| verdicts(&evidence, g, input.table, input.asn);
    let slash24 = v(Granularity::Slash24);
    let forwarders = match input.scanner_ip {
        Some(ip) => detect_misbehaving_forwarders(input.responses, input.asn, ip),
        None => ForwarderFindings::default(),
    };
    let outbound = outbound_verdicts(&ingest_spoofer(input.spoofer), &forwarders.misbehaving);
    let cross_tab = cross_tab(&slash24, &outbound);
    Analysis {
        observations,
        quarantine,
        resolvers,
        resolver_summary,
        prefix: v(Granularity::Prefix),
        asn: v(Granularity::Asn),
        slash24,
        evidence,
        forwarders,
        outbound,
        cross_tab,
    }
}
