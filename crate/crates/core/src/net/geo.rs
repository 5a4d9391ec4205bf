use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Ip4, NetError, Prefix};

/// Country or territory code as found in the geo CSV.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Country(pub String);

impl fmt::Display for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Country {
    fn from(s: &str) -> Self {
        Country(s.to_string())
    }
}

#[derive(Debug, Clone)]
struct GeoRange {
    start: u32,
    end: u32,
    country: Country,
}

/// Outcome of a majority vote over the 256 addresses of a /24.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MajorityCountry {
    pub country: Country,
    /// Addresses of the block mapped to the winner.
    pub votes: u32,
    /// Another country had the same number of addresses.
    pub tied: bool,
}

/// Sorted, non-overlapping address ranges mapped to countries.
#[derive(Debug, Clone, Default)]
pub struct GeoMap {
    ranges: Vec<GeoRange>,
}

impl GeoMap {
    pub fn from_ranges<I>(ranges: I) -> Result<Self, NetError>
    where
        I: IntoIterator<Item = (Ip4, Ip4, Country)>,
    {
        let mut v = Vec::new();
        for (s, e, c) in ranges {
            if s > e {
                return Err(NetError::BadAddress(format!(
                    "range start {s} after end {e}"
                )));
            }
            v.push(GeoRange {
                start: s.0,
                end: e.0,
                country: c,
            });
        }
        v.sort_by_key(|r| r.start);
        for w in v.windows(2) {
            if w[1].start <= w[0].end {
                return Err(NetError::OverlappingRanges(
                    format!("{}-{}", Ip4(w[0].start), Ip4(w[0].end)),
                    format!("{}-{}", Ip4(w[1].start), Ip4(w[1].end)),
                ));
            }
        }
        Ok(GeoMap { ranges: v })
    }

    /// Reads `start_ip,end_ip,country` lines; a header row and `#` comments are
    /// skipped.
    pub fn parse_csv(text: &str) -> Result<Self, NetError> {
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (i == 0 && line.starts_with("start")) {
                continue;
            }
            let err = |reason: String| NetError::Line {
                line: i + 1,
                reason,
            };
            let mut parts = line.split(',').map(str::trim);
            let (Some(s), Some(e), Some(c), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(err("expected start_ip,end_ip,country".into()));
            };
            if c.is_empty() {
                return Err(err("empty country".into()));
            }
            let s: Ip4 = s.parse().map_err(|e: NetError| err(e.to_string()))?;
            let e: Ip4 = e.parse().map_err(|e: NetError| err(e.to_string()))?;
            rows.push((s, e, Country::from(c)));
        }
        Self::from_ranges(rows)
    }

    pub fn country_of(&self, ip: Ip4) -> Option<&Country> {
        let idx = self.ranges.partition_point(|r| r.start <= ip.0);
        let r = self.ranges.get(idx.checked_sub(1)?)?;
        (ip.0 <= r.end).then_some(&r.country)
    }

    /// Country holding most addresses of `block`, computed by intersecting the
    /// block with the ranges. Unmapped addresses do not vote; ties go to the
    /// smallest code.
    pub fn majority_country(&self, block: Prefix) -> Option<MajorityCountry> {
        let lo = block.base().0;
        let hi = block.last().0;
        let first = self.ranges.partition_point(|r| r.end < lo);
        let mut votes: Vec<(&Country, u64)> = Vec::new();
        for r in self.ranges[first..].iter().take_while(|r| r.start <= hi) {
            let n = (r.end.min(hi) - r.start.max(lo)) as u64 + 1;
            match votes.iter_mut().find(|(c, _)| *c == &r.country) {
                Some((_, v)) => *v += n,
                None => votes.push((&r.country, n)),
            }
        }
        let best = votes.iter().map(|(_, v)| *v).max()?;
        let mut winners: Vec<&Country> = votes
            .iter()
            .filter(|(_, v)| *v == best)
            .map(|(c, _)| *c)
            .collect();
        winners.sort();
        Some(MajorityCountry {
            country: winners[0].clone(),
            votes: best as u32,
            tied: winners.len() > 1,
        })
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}
