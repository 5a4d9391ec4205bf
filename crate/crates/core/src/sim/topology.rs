use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{Asn, AsnMap, Ip4, Prefix, PrefixMap, RoutingTable};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("topology JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("prefixes {0} and {1} overlap")]
    Overlap(Prefix, Prefix),
    #[error("resolver {0} lies outside its network {1}")]
    ResolverOutside(Ip4, Prefix),
    #[error("duplicate resolver {0}")]
    DuplicateResolver(Ip4),
    #[error("loss {0} of network {1} outside [0, 1]")]
    BadLoss(f64, Prefix),
    #[error("transit filter probability {0} outside [0, 1]")]
    BadTransit(f64),
    #[error("forwarder {0} points at {1}, which is not a simulated resolver")]
    UnknownUpstream(Ip4, Ip4),
    #[error("forwarding loop through {0}")]
    ForwardingLoop(Ip4),
    #[error("{0} must lie inside the scanner network")]
    OutsideScannerNet(Ip4),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolverMode {
    NonForwarder,
    Forwarder {
        upstream: Ip4,
        rewrites_source: bool,
    },
}

/// Who a resolver answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Anyone.
    Open,
    /// Only its own network.
    Closed,
    /// Anyone except its own network.
    RefusesOwnLan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResolver {
    pub ip: Ip4,
    pub mode: ResolverMode,
    pub scope: Scope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimNetwork {
    pub prefix: Prefix,
    pub asn: Asn,
    #[serde(default)]
    pub inbound_sav: bool,
    #[serde(default)]
    pub outbound_sav: bool,
    #[serde(default)]
    pub resolvers: Vec<SimResolver>,
    #[serde(default)]
    pub loss: f64,
}

impl SimNetwork {
    pub fn new(prefix: Prefix, asn: Asn) -> Self {
        SimNetwork {
            prefix,
            asn,
            inbound_sav: false,
            outbound_sav: false,
            resolvers: Vec::new(),
            loss: 0.0,
        }
    }
}

fn default_repeat() -> u32 {
    1
}

/// A simulated internet. The scanner and the authoritative server live in
/// `scanner_net`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTopology {
    pub networks: Vec<SimNetwork>,
    #[serde(default)]
    pub transit_filter: f64,
    pub scanner_net: SimNetwork,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scanner_ip: Option<Ip4>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_ip: Option<Ip4>,
    /// Times each resolver repeats its query to the authoritative server.
    /// Values above 1 exercise deduplication.
    #[serde(default = "default_repeat")]
    pub repeat_queries: u32,
}

impl SimTopology {
    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        let t: SimTopology = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }

    pub fn scanner_ip(&self) -> Ip4 {
        self.scanner_ip
            .unwrap_or(Ip4(self.scanner_net.prefix.base().0 + 1))
    }

    pub fn auth_ip(&self) -> Ip4 {
        self.auth_ip
            .unwrap_or(Ip4(self.scanner_net.prefix.base().0 + 2))
    }

    /// Every network, scanner network last.
    pub fn all_networks(&self) -> impl Iterator<Item = &SimNetwork> {
        self.networks
            .iter()
            .chain(std::iter::once(&self.scanner_net))
    }

    /// The announced prefixes of the probed networks.
    pub fn routing_table(&self) -> RoutingTable {
        RoutingTable::from_prefixes(self.networks.iter().map(|n| n.prefix))
    }

    pub fn asn_map(&self) -> AsnMap {
        AsnMap::from_entries(self.all_networks().map(|n| (n.prefix, n.asn)))
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        if !(0.0..=1.0).contains(&self.transit_filter) {
            return Err(TopologyError::BadTransit(self.transit_filter));
        }
        let mut sorted: Vec<Prefix> = self.all_networks().map(|n| n.prefix).collect();
        sorted.sort();
        for w in sorted.windows(2) {
            if w[0].covers(w[1]) || w[1].covers(w[0]) {
                return Err(TopologyError::Overlap(w[0], w[1]));
            }
        }
        for ip in [self.scanner_ip(), self.auth_ip()] {
            if !self.scanner_net.prefix.contains(ip) {
                return Err(TopologyError::OutsideScannerNet(ip));
            }
        }
        let mut modes: HashMap<Ip4, ResolverMode> = HashMap::new();
        for n in self.all_networks() {
            if !(0.0..=1.0).contains(&n.loss) {
                return Err(TopologyError::BadLoss(n.loss, n.prefix));
            }
            for r in &n.resolvers {
                if !n.prefix.contains(r.ip) {
                    return Err(TopologyError::ResolverOutside(r.ip, n.prefix));
                }
                if modes.insert(r.ip, r.mode).is_some() {
                    return Err(TopologyError::DuplicateResolver(r.ip));
                }
            }
        }
        for (&ip, mode) in &modes {
            let mut seen = HashSet::from([ip]);
            let mut cur = *mode;
            while let ResolverMode::Forwarder { upstream, .. } = cur {
                cur = *modes
                    .get(&upstream)
                    .ok_or(TopologyError::UnknownUpstream(ip, upstream))?;
                if !seen.insert(upstream) {
                    return Err(TopologyError::ForwardingLoop(ip));
                }
            }
        }
        Ok(())
    }

    /// Network index by address; the scanner network has index
    /// `networks.len()`.
    pub(crate) fn network_index(&self) -> PrefixMap<usize> {
        self.all_networks()
            .enumerate()
            .map(|(i, n)| (n.prefix, i))
            .collect()
    }
}
