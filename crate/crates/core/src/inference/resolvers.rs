use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::collector::{classify_proxy, ProxyClass, QueryObservation};
use crate::net::{to_slash24, Ip4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Openness {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResolverRecord {
    pub ip: Ip4,
    pub proxy: ProxyClass,
    pub openness: Openness,
}

/// Resolver counts split by proxy class and openness.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ResolverSummary {
    pub unique_requests: u64,
    pub forwarders_open: u64,
    pub forwarders_closed: u64,
    pub non_forwarders_open: u64,
    pub non_forwarders_closed: u64,
    /// Forwarded queries whose relaying resolver sits in another /24 than
    /// the encoded target. They still credit the target's network.
    pub cross_network_forwards: u64,
}

/// One record per probed host that reached the collector in the spoofed
/// scan. A host is a non-forwarder if it ever contacted us itself.
/// `observations` should already be deduplicated.
pub fn resolver_records(
    observations: &[QueryObservation],
    open: &BTreeSet<Ip4>,
) -> (Vec<ResolverRecord>, ResolverSummary) {
    let mut by_target: BTreeMap<Ip4, ProxyClass> = BTreeMap::new();
    let mut summary = ResolverSummary::default();
    for o in observations.iter().filter(|o| o.scan.is_spoofed()) {
        summary.unique_requests += 1;
        let class = classify_proxy(o);
        if class == ProxyClass::Forwarder && to_slash24(o.source_ip) != to_slash24(o.target) {
            summary.cross_network_forwards += 1;
        }
        let e = by_target.entry(o.target).or_insert(class);
        if class == ProxyClass::NonForwarder {
            *e = class;
        }
    }
    let records: Vec<ResolverRecord> = by_target
        .into_iter()
        .map(|(ip, proxy)| ResolverRecord {
            ip,
            proxy,
            openness: if open.contains(&ip) {
                Openness::Open
            } else {
                Openness::Closed
            },
        })
        .collect();
    for r in &records {
        let slot = match (r.proxy, r.openness) {
            (ProxyClass::Forwarder, Openness::Open) => &mut summary.forwarders_open,
            (ProxyClass::Forwarder, Openness::Closed) => &mut summary.forwarders_closed,
            (ProxyClass::NonForwarder, Openness::Open) => &mut summary.non_forwarders_open,
            (ProxyClass::NonForwarder, Openness::Closed) => &mut summary.non_forwarders_closed,
        };
        *slot += 1;
    }
    (records, summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{Nonce, ScanId};
    use crate::time::Timestamp;

    fn obs(src: &str, target: &str) -> QueryObservation {
        QueryObservation {
            source_ip: src.parse().unwrap(),
            nonce: Nonce::new("abcdef").unwrap(),
            target: target.parse().unwrap(),
            scan: ScanId::spoofed(1),
            raw_name: String::new(),
            ts: Timestamp(0),
        }
    }

    #[test]
    fn split_by_class_and_openness() {
        let o = [
            obs("1.1.1.1", "1.1.1.1"),
            obs("8.8.8.8", "2.2.2.2"),
            obs("8.8.8.8", "1.1.1.1"),
            obs("2.2.2.9", "2.2.2.3"),
        ];
        let open = ["2.2.2.2".parse().unwrap()].into();
        let (recs, s) = resolver_records(&o, &open);
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].proxy, ProxyClass::NonForwarder);
        assert_eq!(s.non_forwarders_closed, 1);
        assert_eq!(s.forwarders_open, 1);
        assert_eq!(s.forwarders_closed, 1);
        assert_eq!(s.unique_requests, 4);
        assert_eq!(s.cross_network_forwards, 2);
    }
}
