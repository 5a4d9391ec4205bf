//! Independent reference implementations used as test oracles, plus fixture
//! builders. Each oracle is deliberately naive.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use savprobe_core::inference::{SpooferState, Verdict};
use savprobe_core::net::{Asn, Country, GeoMap, Ip4, Prefix};
use savprobe_core::sim::{ResolverMode, Scope, SimNetwork, SimResolver, SimTopology};

/// RFC 1071 sum computed over a u64 accumulator with a final fold.
pub fn ones_complement(data: &[u8]) -> u16 {
    let mut acc: u64 = 0;
    let mut i = 0;
    while i < data.len() {
        let hi = data[i] as u64;
        let lo = if i + 1 < data.len() {
            data[i + 1] as u64
        } else {
            0
        };
        acc += (hi << 8) | lo;
        i += 2;
    }
    while acc > 0xffff {
        acc = (acc & 0xffff) + (acc >> 16);
    }
    !(acc as u16)
}

/// True if the IPv4 header and UDP checksum (with pseudo-header) of `pkt`
/// verify.
pub fn checksums_valid(pkt: &[u8]) -> bool {
    if pkt.len() < 28 || pkt[0] >> 4 != 4 {
        return false;
    }
    let ihl = (pkt[0] & 0x0f) as usize * 4;
    if ones_complement(&pkt[..ihl]) != 0 {
        return false;
    }
    let udp = &pkt[ihl..];
    let udp_len = u16::from_be_bytes([udp[4], udp[5]]) as usize;
    if udp_len != udp.len() {
        return false;
    }
    let mut pseudo = Vec::new();
    pseudo.extend_from_slice(&pkt[12..20]);
    pseudo.push(0);
    pseudo.push(17);
    pseudo.extend_from_slice(&(udp_len as u16).to_be_bytes());
    pseudo.extend_from_slice(udp);
    let stored = u16::from_be_bytes([udp[6], udp[7]]);
    stored != 0 && ones_complement(&pseudo) == 0
}

/// Longest containing prefix by scanning every entry.
pub fn linear_lpm(entries: &[Prefix], ip: Ip4) -> Option<Prefix> {
    entries
        .iter()
        .filter(|p| p.contains(ip))
        .max_by_key(|p| p.len())
        .copied()
}

/// Maximal prefixes by pairwise containment, sorted.
pub fn containment_cover(input: &[Prefix]) -> Vec<Prefix> {
    let mut out: Vec<Prefix> = input
        .iter()
        .filter(|p| p.len() > 0)
        .filter(|p| {
            !input
                .iter()
                .any(|q| q.len() > 0 && q != *p && q.covers(**p))
        })
        .copied()
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Latest record per /24 by sorting on (timestamp, outcome rank).
pub fn spoofer_sort_oracle(records: &[SpooferState]) -> BTreeMap<Prefix, SpooferState> {
    use savprobe_core::inference::SpooferOutcome::*;
    let rank = |s: &SpooferState| match s.state {
        Unknown => 0,
        Rewritten => 1,
        Blocked => 2,
        Received => 3,
    };
    let mut v = records.to_vec();
    v.sort_by_key(|s| (s.ts, rank(s)));
    let mut out = BTreeMap::new();
    for s in v {
        out.insert(s.slash24, s);
    }
    out
}

/// Majority country of a /24 by looking up each of its 256 addresses.
pub fn majority_by_points(geo: &GeoMap, block: Prefix) -> Option<(Country, u32, bool)> {
    let mut votes: BTreeMap<Country, u32> = BTreeMap::new();
    for i in 0..256u32 {
        if let Some(c) = geo.country_of(Ip4(block.base().0 + i)) {
            *votes.entry(c.clone()).or_default() += 1;
        }
    }
    let best = *votes.values().max()?;
    let mut winners = votes
        .iter()
        .filter(|(_, v)| **v == best)
        .map(|(c, _)| c.clone());
    let first = winners.next()?;
    let tied = winners.next().is_some();
    Some((first, best, tied))
}

pub fn verdict_counts(v: &BTreeMap<Prefix, Verdict>) -> (usize, usize, usize) {
    let c = |x| v.values().filter(|y| **y == x).count();
    (c(Verdict::S), c(Verdict::NS), c(Verdict::I))
}

fn ip(a: u8, b: u8, c: u8, d: u8) -> Ip4 {
    Ip4(u32::from_be_bytes([a, b, c, d]))
}

/// `n` networks of mixed policies: 40 transit-provider networks hosting
/// public resolvers (a quarter of them also run a forwarder, making chains
/// of depth 2) and `n - 40` edge networks with 0 to 3 resolvers each.
pub fn fixture_topology(n: usize, seed: u64, loss: f64) -> SimTopology {
    assert!(n > 40 && n - 40 <= 65536);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut networks = Vec::with_capacity(n);
    let providers = 40u8;
    for i in 0..providers {
        let prefix = Prefix::new(ip(40, 0, i, 0), 24).unwrap();
        let mut net = SimNetwork::new(prefix, Asn(4000 + i as u32));
        net.inbound_sav = i % 5 == 0;
        net.loss = loss;
        net.resolvers.push(SimResolver {
            ip: ip(40, 0, i, 53),
            mode: ResolverMode::NonForwarder,
            scope: Scope::Open,
        });
        if i % 4 == 1 {
            net.resolvers.push(SimResolver {
                ip: ip(40, 0, i, 54),
                mode: ResolverMode::Forwarder {
                    upstream: ip(40, 0, (i + 2) % providers, 53),
                    rewrites_source: i % 8 == 1,
                },
                scope: Scope::Closed,
            });
        }
        networks.push(net);
    }
    for k in 0..(n - 40) {
        let prefix = Prefix::new(ip(20, (k >> 8) as u8, k as u8, 0), 24).unwrap();
        let mut net = SimNetwork::new(prefix, Asn(1000 + (k / 3) as u32));
        net.inbound_sav = rng.random_bool(0.35);
        net.outbound_sav = rng.random_bool(0.3);
        net.loss = loss;
        let count = match rng.random_range(0..100) {
            0..20 => 0,
            20..60 => 1,
            60..85 => 2,
            _ => 3,
        };
        let mut hosts: Vec<u8> = Vec::new();
        while hosts.len() < count {
            let h = rng.random_range(1..=254u8);
            if !hosts.contains(&h) {
                hosts.push(h);
            }
        }
        for h in hosts {
            let mode = match rng.random_range(0..100) {
                0..50 => ResolverMode::NonForwarder,
                50..75 => ResolverMode::Forwarder {
                    upstream: ip(40, 0, rng.random_range(0..providers), 53),
                    rewrites_source: true,
                },
                75..90 => ResolverMode::Forwarder {
                    upstream: ip(40, 0, rng.random_range(0..providers), 53),
                    rewrites_source: false,
                },
                _ => ResolverMode::Forwarder {
                    upstream: ip(40, 0, 4 * rng.random_range(0..providers / 4) + 1, 54),
                    rewrites_source: rng.random_bool(0.5),
                },
            };
            let scope = match rng.random_range(0..100) {
                0..40 => Scope::Open,
                40..85 => Scope::Closed,
                _ => Scope::RefusesOwnLan,
            };
            net.resolvers.push(SimResolver {
                ip: ip(20, (k >> 8) as u8, k as u8, h),
                mode,
                scope,
            });
        }
        networks.push(net);
    }
    let t = SimTopology {
        networks,
        transit_filter: 0.0,
        scanner_net: SimNetwork::new("30.0.0.0/24".parse().unwrap(), Asn(300)),
        rng_seed: seed,
        scanner_ip: None,
        auth_ip: None,
        repeat_queries: 1,
    };
    t.validate().expect("fixture is valid");
    t
}
