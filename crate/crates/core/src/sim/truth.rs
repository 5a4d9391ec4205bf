use std::collections::{BTreeMap, BTreeSet};

use crate::inference::Verdict;
use crate::net::{to_slash24, Ip4, Prefix, PrefixMap};
use crate::plan::spoof_source;

use super::topology::{ResolverMode, Scope, SimNetwork, SimResolver, SimTopology};

/// What a lossless scan of a topology must find.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    /// Expected /24 verdicts. /24s without resolver evidence are absent.
    pub verdicts: BTreeMap<Prefix, Verdict>,
    /// Resolvers whose spoofed probe must reach the authoritative server.
    pub vulnerable: BTreeSet<Ip4>,
    /// Resolvers that must answer the scanner themselves.
    pub open: BTreeSet<Ip4>,
    /// `(queried, responder)` for answers reaching the scanner from another
    /// address.
    pub leaked_answers: BTreeSet<(Ip4, Ip4)>,
}

struct Model<'a> {
    topo: &'a SimTopology,
    nets: PrefixMap<&'a SimNetwork>,
    resolvers: BTreeMap<Ip4, (&'a SimNetwork, &'a SimResolver)>,
}

impl<'a> Model<'a> {
    fn net(&self, ip: Ip4) -> Option<&'a SimNetwork> {
        self.nets.longest_match(ip).map(|(_, n)| *n)
    }

    // a packet with source `src` leaving `origin` arrives at `dst`
    fn reach(&self, src: Ip4, origin: &SimNetwork, dst: Ip4) -> bool {
        if origin.outbound_sav && !origin.prefix.contains(src) {
            return false;
        }
        let Some(d) = self.net(dst) else { return false };
        !(d.prefix != origin.prefix && d.inbound_sav && d.prefix.contains(src))
    }

    fn accepts(&self, net: &SimNetwork, r: &SimResolver, client: Ip4, relayed: bool) -> bool {
        let lan = net.prefix.contains(client);
        relayed
            || match r.scope {
                Scope::Open => true,
                Scope::Closed => lan,
                Scope::RefusesOwnLan => !lan,
            }
    }

    // query from `client` sitting at resolver `ip` causes an authoritative arrival
    fn auth_hit(&self, ip: Ip4, client: Ip4, relayed: bool) -> bool {
        let Some(&(net, r)) = self.resolvers.get(&ip) else {
            return false;
        };
        if !self.accepts(net, r, client, relayed) {
            return false;
        }
        match r.mode {
            ResolverMode::NonForwarder => self.reach(ip, net, self.topo.auth_ip()),
            ResolverMode::Forwarder {
                upstream,
                rewrites_source: true,
            } => self.reach(ip, net, upstream) && self.auth_hit(upstream, ip, true),
            ResolverMode::Forwarder {
                upstream,
                rewrites_source: false,
            } => self.reach(client, net, upstream) && self.auth_hit(upstream, client, true),
        }
    }

    // address a NOERROR answer to `client` arrives from, if one does
    fn answer_from(&self, ip: Ip4, client: Ip4, relayed: bool) -> Option<Ip4> {
        let &(net, r) = self.resolvers.get(&ip)?;
        if !self.accepts(net, r, client, relayed) {
            return None;
        }
        let back = |from: Ip4| self.reach(from, net, client).then_some(from);
        match r.mode {
            ResolverMode::NonForwarder => {
                let auth = self.topo.auth_ip();
                let round_trip =
                    self.reach(ip, net, auth) && self.reach(auth, &self.topo.scanner_net, ip);
                round_trip.then(|| back(ip)).flatten()
            }
            ResolverMode::Forwarder {
                upstream,
                rewrites_source: true,
            } => {
                let ok =
                    self.reach(ip, net, upstream) && self.answer_from(upstream, ip, true).is_some();
                ok.then(|| back(ip)).flatten()
            }
            ResolverMode::Forwarder {
                upstream,
                rewrites_source: false,
            } => {
                if !self.reach(client, net, upstream) {
                    return None;
                }
                self.answer_from(upstream, client, true)
            }
        }
    }
}

/// Expected outcome of a scan with no loss and no transit filtering,
/// derived from the configured policies alone.
pub fn ground_truth(topo: &SimTopology) -> GroundTruth {
    let m = Model {
        topo,
        nets: topo.all_networks().map(|n| (n.prefix, n)).collect(),
        resolvers: topo
            .all_networks()
            .flat_map(|n| n.resolvers.iter().map(move |r| (r.ip, (n, r))))
            .collect(),
    };
    let scanner = topo.scanner_ip();
    let mut gt = GroundTruth::default();
    let spoofing_allowed = !topo.scanner_net.outbound_sav;
    for n in &topo.networks {
        for r in &n.resolvers {
            if let Some(spoofed) = spoof_source(r.ip, n.prefix) {
                if spoofing_allowed
                    && m.reach(spoofed, &topo.scanner_net, r.ip)
                    && m.auth_hit(r.ip, spoofed, false)
                {
                    gt.vulnerable.insert(r.ip);
                }
            }
            if m.reach(scanner, &topo.scanner_net, r.ip) {
                match m.answer_from(r.ip, scanner, false) {
                    Some(from) if from == r.ip => {
                        gt.open.insert(r.ip);
                    }
                    Some(from) => {
                        gt.leaked_answers.insert((r.ip, from));
                    }
                    None => {}
                }
            }
        }
    }
    let mut counts: BTreeMap<Prefix, (u64, u64)> = BTreeMap::new();
    for ip in &gt.vulnerable {
        counts.entry(to_slash24(*ip)).or_default().0 += 1;
    }
    for ip in gt.open.difference(&gt.vulnerable) {
        counts.entry(to_slash24(*ip)).or_default().1 += 1;
    }
    gt.verdicts = counts
        .into_iter()
        .filter_map(|(p, (s, n))| Verdict::from_counts(s, n).map(|v| (p, v)))
        .collect();
    gt
}
