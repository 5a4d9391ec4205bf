//! From observations to verdicts: inbound evidence per resolver, S/NS/I
//! classification at three granularities, resolver tables and the outbound
//! comparison.

mod outbound;
mod pipeline;
mod resolvers;

pub use outbound::{
    cross_tab, ingest_spoofer, outbound_verdicts, parse_spoofer_csv, DirectionCrossTab, Outbound,
    OutboundMap, SpooferOutcome, SpooferState,
};
pub use pipeline::{analyze, Analysis, AnalysisInput};
pub use resolvers::{resolver_records, Openness, ResolverRecord, ResolverSummary};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::collector::QueryObservation;
use crate::net::{to_slash24, Asn, AsnMap, Ip4, Prefix, RoutingTable};

/// Per-resolver inbound evidence from one or more scans.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanEvidence {
    /// Encoded targets of spoofed-scan queries that reached the collector.
    pub vulnerable: BTreeSet<Ip4>,
    /// Resolvers that answered the genuine query.
    pub open: BTreeSet<Ip4>,
}

impl ScanEvidence {
    /// Unions another scan's evidence into this one. A resolver that resolved
    /// a spoofed query in any scan stays vulnerable.
    pub fn merge(&mut self, other: &ScanEvidence) {
        self.vulnerable.extend(other.vulnerable.iter().copied());
        self.open.extend(other.open.iter().copied());
    }

    /// Open resolvers that never resolved a spoofed query.
    pub fn sav_present(&self) -> impl Iterator<Item = Ip4> + '_ {
        self.open.difference(&self.vulnerable).copied()
    }
}

/// Builds evidence from decoded collector observations and the open set.
/// Only spoofed-scan (`s`) observations count as vulnerable evidence.
pub fn inbound_evidence(observations: &[QueryObservation], open: &BTreeSet<Ip4>) -> ScanEvidence {
    ScanEvidence {
        vulnerable: observations
            .iter()
            .filter(|o| o.scan.is_spoofed())
            .map(|o| o.target)
            .collect(),
        open: open.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Granularity {
    Slash24,
    Prefix,
    Asn,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::Slash24, Granularity::Prefix, Granularity::Asn];

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Slash24 => "slash24",
            Granularity::Prefix => "prefix",
            Granularity::Asn => "asn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Unit {
    Slash24(Prefix),
    Prefix(Prefix),
    Asn(Asn),
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unit::Slash24(p) | Unit::Prefix(p) => p.fmt(f),
            Unit::Asn(a) => a.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Verdict {
    /// Spoofed queries get in.
    S,
    /// Spoofed queries are filtered.
    NS,
    /// Both outcomes observed.
    I,
}

impl Verdict {
    pub fn from_counts(spoofed_hits: u64, sav_hits: u64) -> Option<Verdict> {
        match (spoofed_hits > 0, sav_hits > 0) {
            (true, false) => Some(Verdict::S),
            (false, true) => Some(Verdict::NS),
            (true, true) => Some(Verdict::I),
            (false, false) => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UnitVerdict {
    pub unit: Unit,
    pub verdict: Verdict,
    pub spoofed_hits: u64,
    pub sav_hits: u64,
}

/// Verdicts at one granularity. Units without evidence are absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictSet {
    pub granularity: Granularity,
    pub units: BTreeMap<Unit, UnitVerdict>,
    /// Evidence-bearing resolvers with no covering prefix or AS.
    pub unmapped: u64,
}

impl VerdictSet {
    pub fn get(&self, unit: &Unit) -> Option<Verdict> {
        self.units.get(unit).map(|v| v.verdict)
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.units.values().filter(|v| v.verdict == verdict).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = &UnitVerdict> {
        self.units.values()
    }
}

fn unit_of(ip: Ip4, g: Granularity, table: &RoutingTable, asn: &AsnMap) -> Option<Unit> {
    match g {
        Granularity::Slash24 => Some(Unit::Slash24(to_slash24(ip))),
        Granularity::Prefix => table.lpm_lookup(ip).map(Unit::Prefix),
        Granularity::Asn => asn.asn_of(ip).map(Unit::Asn),
    }
}

/// Tallies evidence into units of `granularity`. Prefix units come from the
/// longest match in `table`, which should be the un-aggregated table.
pub fn verdicts(
    ev: &ScanEvidence,
    granularity: Granularity,
    table: &RoutingTable,
    asn: &AsnMap,
) -> VerdictSet {
    let mut counts: BTreeMap<Unit, (u64, u64)> = BTreeMap::new();
    let mut unmapped = 0;
    let sav: Vec<Ip4> = ev.sav_present().collect();
    for (ip, spoofed) in ev
        .vulnerable
        .iter()
        .map(|ip| (*ip, true))
        .chain(sav.into_iter().map(|ip| (ip, false)))
    {
        let Some(unit) = unit_of(ip, granularity, table, asn) else {
            unmapped += 1;
            continue;
        };
        let c = counts.entry(unit).or_default();
        if spoofed {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    let units = counts
        .into_iter()
        .filter_map(|(unit, (s, n))| {
            Verdict::from_counts(s, n).map(|verdict| {
                (
                    unit,
                    UnitVerdict {
                        unit,
                        verdict,
                        spoofed_hits: s,
                        sav_hits: n,
                    },
                )
            })
        })
        .collect();
    VerdictSet {
        granularity,
        units,
        unmapped,
    }
}
