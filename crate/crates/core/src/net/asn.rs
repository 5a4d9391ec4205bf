use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lpm::PrefixMap;
use super::{Ip4, NetError, Prefix};

/// Autonomous system number.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Asn(pub u32);

impl fmt::Display for Asn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AS{}", self.0)
    }
}

impl fmt::Debug for Asn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Asn {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t
            .strip_prefix("AS")
            .or_else(|| t.strip_prefix("as"))
            .unwrap_or(t);
        digits
            .parse()
            .map(Asn)
            .map_err(|_| NetError::BadAddress(format!("bad ASN {s:?}")))
    }
}

/// Prefix-to-origin-AS mapping with longest-match lookup.
///
/// A prefix announced by several ASes (MOAS) maps to the numerically smallest
/// ASN; the conflicts are kept for diagnostics. Unmapped addresses yield
/// `None`.
#[derive(Debug, Clone, Default)]
pub struct AsnMap {
    map: PrefixMap<Asn>,
    moas: BTreeMap<Prefix, Vec<Asn>>,
}

impl AsnMap {
    pub fn from_entries<I: IntoIterator<Item = (Prefix, Asn)>>(entries: I) -> Self {
        let mut all: BTreeMap<Prefix, Vec<Asn>> = BTreeMap::new();
        for (p, a) in entries {
            let v = all.entry(p).or_default();
            if !v.contains(&a) {
                v.push(a);
            }
        }
        let mut map = PrefixMap::new();
        let mut moas = BTreeMap::new();
        for (p, mut asns) in all {
            asns.sort_unstable();
            map.insert(p, asns[0]);
            if asns.len() > 1 {
                moas.insert(p, asns);
            }
        }
        AsnMap { map, moas }
    }

    /// Reads `prefix,asn` lines. A `prefix,asn` header and `#` comments are
    /// skipped.
    pub fn parse_csv(text: &str) -> Result<Self, NetError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (i == 0 && line.eq_ignore_ascii_case("prefix,asn")) {
                continue;
            }
            let err = |reason: String| NetError::Line {
                line: i + 1,
                reason,
            };
            let (p, a) = line
                .split_once(',')
                .ok_or_else(|| err("expected prefix,asn".into()))?;
            let p: Prefix = p.parse().map_err(|e: NetError| err(e.to_string()))?;
            let a: Asn = a.parse().map_err(|e: NetError| err(e.to_string()))?;
            entries.push((p, a));
        }
        Ok(Self::from_entries(entries))
    }

    pub fn asn_of(&self, ip: Ip4) -> Option<Asn> {
        self.map.longest_match(ip).map(|(_, a)| *a)
    }

    /// Origin of the most specific mapping covering `prefix`.
    pub fn asn_of_prefix(&self, prefix: Prefix) -> Option<Asn> {
        self.map.longest_cover(prefix).map(|(_, a)| *a)
    }

    /// Prefixes announced by more than one AS, with every candidate ASN.
    pub fn moas_conflicts(&self) -> &BTreeMap<Prefix, Vec<Asn>> {
        &self.moas
    }

    pub fn entries(&self) -> impl Iterator<Item = (Prefix, Asn)> + '_ {
        self.map.iter().map(|(p, a)| (p, *a))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
