use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::net::{to_slash24, Ip4, NetError, Prefix};

use super::{Unit, Verdict, VerdictSet};

/// Outcome of an outbound spoofing test run from inside a /24.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpooferOutcome {
    Blocked,
    Rewritten,
    Unknown,
    Received,
}

impl SpooferOutcome {
    // breaks timestamp ties between records of one /24
    fn rank(self) -> u8 {
        match self {
            SpooferOutcome::Unknown => 0,
            SpooferOutcome::Rewritten => 1,
            SpooferOutcome::Blocked => 2,
            SpooferOutcome::Received => 3,
        }
    }
}

impl FromStr for SpooferOutcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "blocked" => Ok(SpooferOutcome::Blocked),
            "rewritten" => Ok(SpooferOutcome::Rewritten),
            "unknown" => Ok(SpooferOutcome::Unknown),
            "received" => Ok(SpooferOutcome::Received),
            other => Err(format!("unknown spoofer state {other:?}")),
        }
    }
}

impl fmt::Display for SpooferOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpooferOutcome::Blocked => "blocked",
            SpooferOutcome::Rewritten => "rewritten",
            SpooferOutcome::Unknown => "unknown",
            SpooferOutcome::Received => "received",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpooferState {
    pub slash24: Prefix,
    pub state: SpooferOutcome,
    /// Microseconds since the Unix epoch.
    pub ts: i64,
}

fn parse_ts(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return secs.checked_mul(1_000_000);
    }
    chrono::DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|t| t.timestamp_micros())
}

/// Parses CSV `slash24,state,timestamp`; the timestamp is Unix seconds or
/// RFC 3339. A header row is optional.
pub fn parse_spoofer_csv(text: &str) -> Result<Vec<SpooferState>, NetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let err = |reason: String| NetError::Line { line, reason };
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if i == 0 && rec.get(0) == Some("slash24") {
            continue;
        }
        if rec.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", rec.len())));
        }
        let slash24: Prefix = rec[0].parse().map_err(|e: NetError| err(e.to_string()))?;
        if slash24.len() != 24 {
            return Err(err(format!("{slash24} is not a /24")));
        }
        let state = rec[1].parse().map_err(err)?;
        let ts = parse_ts(&rec[2]).ok_or_else(|| err(format!("bad timestamp {:?}", &rec[2])))?;
        out.push(SpooferState { slash24, state, ts });
    }
    Ok(out)
}

/// Keeps the latest record per /24. Records with equal timestamps resolve
/// received > blocked > rewritten > unknown, so the result does not depend on
/// input order.
pub fn ingest_spoofer(records: &[SpooferState]) -> BTreeMap<Prefix, SpooferState> {
    let mut out: BTreeMap<Prefix, SpooferState> = BTreeMap::new();
    for r in records {
        out.entry(r.slash24)
            .and_modify(|cur| {
                if (r.ts, r.state.rank()) > (cur.ts, cur.state.rank()) {
                    *cur = *r;
                }
            })
            .or_insert(*r);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outbound {
    Vuln,
    Filtered,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutboundMap {
    pub map: BTreeMap<Prefix, Outbound>,
    /// /24s where a misbehaving forwarder contradicts a blocked test.
    pub conflicts: u64,
    /// Spoofer records left out as rewritten or unknown.
    pub excluded: u64,
}

/// Outbound status per /24 from Spoofer results and misbehaving forwarders.
/// A leaked packet outweighs a blocked test.
pub fn outbound_verdicts(
    spoofer: &BTreeMap<Prefix, SpooferState>,
    forwarders: &BTreeSet<(Ip4, Ip4)>,
) -> OutboundMap {
    let mut out = OutboundMap::default();
    for (p, s) in spoofer {
        match s.state {
            SpooferOutcome::Blocked => {
                out.map.insert(*p, Outbound::Filtered);
            }
            SpooferOutcome::Received => {
                out.map.insert(*p, Outbound::Vuln);
            }
            SpooferOutcome::Rewritten | SpooferOutcome::Unknown => out.excluded += 1,
        }
    }
    let fwd_24s: BTreeSet<Prefix> = forwarders.iter().map(|(f, _)| to_slash24(*f)).collect();
    for p in fwd_24s {
        if out.map.insert(p, Outbound::Vuln) == Some(Outbound::Filtered) {
            out.conflicts += 1;
        }
    }
    out
}

/// Inbound against outbound status for /24s with a consistent inbound
/// verdict and an outbound status.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DirectionCrossTab {
    /// No filtering in either direction.
    pub inbound_vuln_outbound_vuln: u64,
    pub inbound_vuln_outbound_filtered: u64,
    pub inbound_filtered_outbound_vuln: u64,
    /// Filtering in both directions.
    pub inbound_filtered_outbound_filtered: u64,
}

impl DirectionCrossTab {
    pub fn total(&self) -> u64 {
        self.inbound_vuln_outbound_vuln
            + self.inbound_vuln_outbound_filtered
            + self.inbound_filtered_outbound_vuln
            + self.inbound_filtered_outbound_filtered
    }
}

/// `inbound` must be at /24 granularity; I verdicts are left out.
pub fn cross_tab(inbound: &VerdictSet, outbound: &OutboundMap) -> DirectionCrossTab {
    let mut t = DirectionCrossTab::default();
    for v in inbound.iter() {
        let Unit::Slash24(p) = v.unit else { continue };
        let Some(o) = outbound.map.get(&p) else {
            continue;
        };
        let cell = match (v.verdict, o) {
            (Verdict::S, Outbound::Vuln) => &mut t.inbound_vuln_outbound_vuln,
            (Verdict::S, Outbound::Filtered) => &mut t.inbound_vuln_outbound_filtered,
            (Verdict::NS, Outbound::Vuln) => &mut t.inbound_filtered_outbound_vuln,
            (Verdict::NS, Outbound::Filtered) => &mut t.inbound_filtered_outbound_filtered,
            (Verdict::I, _) => continue,
        };
        *cell += 1;
    }
    t
}
