//! Authoritative server for the scan zone and the offline handling of what
//! it logged.

mod log;
mod server;

pub use self::log::{read_log, JsonlLog, LogEntry, MemoryLog, ObservationSink};
pub use server::{serve, AuthCollector, CollectorConfig, CollectorStats};

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::codec::{decode_domain, DnsName, Nonce, Reject, ScanId};
use crate::net::Ip4;
use crate::time::Timestamp;

/// A logged query whose name decoded as a probe name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryObservation {
    pub source_ip: Ip4,
    pub nonce: Nonce,
    pub target: Ip4,
    pub scan: ScanId,
    pub raw_name: String,
    pub ts: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuarantineReason {
    Unparseable,
    #[serde(untagged)]
    Rejected(Reject),
}

/// Log entries that could not be decoded, kept for noise analysis.
#[derive(Debug, Clone, Default)]
pub struct Quarantine {
    pub entries: Vec<(LogEntry, QuarantineReason)>,
    pub counts: BTreeMap<QuarantineReason, u64>,
}

impl Quarantine {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Splits raw log entries into decoded observations and quarantine.
pub fn decode_log(entries: &[LogEntry], zone: &DnsName) -> (Vec<QueryObservation>, Quarantine) {
    let mut obs = Vec::with_capacity(entries.len());
    let mut q = Quarantine::default();
    for e in entries {
        let decoded = match e.name.parse::<DnsName>() {
            Err(_) => Err(QuarantineReason::Unparseable),
            Ok(n) => decode_domain(&n, zone).map_err(QuarantineReason::Rejected),
        };
        match decoded {
            Ok(d) => obs.push(QueryObservation {
                source_ip: e.src,
                nonce: d.nonce,
                target: d.target,
                scan: d.scan,
                raw_name: e.name.clone(),
                ts: e.ts,
            }),
            Err(reason) => {
                *q.counts.entry(reason).or_default() += 1;
                q.entries.push((e.clone(), reason));
            }
        }
    }
    (obs, q)
}

/// First observation per (source, name), names compared case-insensitively.
/// Order is preserved.
pub fn dedup(obs: &[QueryObservation]) -> Vec<QueryObservation> {
    let mut seen = HashSet::with_capacity(obs.len());
    obs.iter()
        .filter(|o| seen.insert((o.source_ip, o.raw_name.to_ascii_lowercase())))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyClass {
    Forwarder,
    NonForwarder,
}

/// A resolver contacting us for its own address resolves by itself; any
/// other source is relaying for the encoded target.
pub fn classify_proxy(obs: &QueryObservation) -> ProxyClass {
    if obs.source_ip == obs.target {
        ProxyClass::NonForwarder
    } else {
        ProxyClass::Forwarder
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(src: &str, name: &str, ts: u64) -> LogEntry {
        LogEntry {
            src: src.parse().unwrap(),
            name: name.to_string(),
            ts: Timestamp(ts),
        }
    }

    fn zone() -> DnsName {
        "zone.test".parse().unwrap()
    }

    #[test]
    fn quarantine_counts_reasons() {
        let log = [
            entry("9.9.9.9", "abcdef.01020304.s1.zone.test", 1),
            entry("9.9.9.9", "www.zone.test", 2),
            entry("9.9.9.9", "abcdef.0102030g.s1.zone.test", 3),
            entry("9.9.9.9", "a\\032b.zone.test", 4),
            entry("9.9.9.9", "abcdef.01020304.s1.other.test", 5),
        ];
        let (obs, q) = decode_log(&log, &zone());
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].target, "1.2.3.4".parse().unwrap());
        assert_eq!(q.len(), 4);
        assert_eq!(q.counts[&QuarantineReason::Rejected(Reject::WrongShape)], 1);
        assert_eq!(q.counts[&QuarantineReason::Rejected(Reject::BadHex)], 1);
        assert_eq!(
            q.counts[&QuarantineReason::Rejected(Reject::ForeignZone)],
            1
        );
        assert_eq!(q.counts[&QuarantineReason::Unparseable], 1);
    }

    #[test]
    fn dedup_is_case_insensitive_and_stable() {
        let log = [
            entry("9.9.9.9", "abcdef.01020304.s1.zone.test", 1),
            entry("8.8.8.8", "abcdef.01020304.s1.zone.test", 2),
            entry("9.9.9.9", "ABCDEF.01020304.S1.zone.test", 3),
        ];
        let (obs, _) = decode_log(&log, &zone());
        let d = dedup(&obs);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].ts, Timestamp(1));
        assert_eq!(d[1].ts, Timestamp(2));
        assert!(dedup(&[]).is_empty());
    }

    #[test]
    fn proxy_rule() {
        let log = [
            entry("1.2.3.5", "abcdef.01020305.s1.zone.test", 1),
            entry("8.8.8.8", "abcdef.01020305.s1.zone.test", 1),
        ];
        let (obs, _) = decode_log(&log, &zone());
        assert_eq!(classify_proxy(&obs[0]), ProxyClass::NonForwarder);
        assert_eq!(classify_proxy(&obs[1]), ProxyClass::Forwarder);
    }
}
