use super::lpm::PrefixMap;
use super::{Ip4, NetError, Prefix};

/// A set of announced prefixes with a longest-prefix-match index.
///
/// Default routes (`0.0.0.0/0`) are dropped on construction; they are never a
/// scan target and would swallow every other entry on aggregation.
#[derive(Debug, Clone, Default)]
pub struct RoutingTable {
    entries: Vec<Prefix>,
    index: PrefixMap<()>,
    dropped_default: usize,
}

impl RoutingTable {
    /// Table holding every distinct input prefix, overlaps included.
    pub fn from_prefixes<I: IntoIterator<Item = Prefix>>(prefixes: I) -> Self {
        let mut dropped_default = 0;
        let mut entries: Vec<Prefix> = prefixes
            .into_iter()
            .filter(|p| {
                let keep = p.len() > 0;
                if !keep {
                    dropped_default += 1;
                }
                keep
            })
            .collect();
        entries.sort_unstable();
        entries.dedup();
        if dropped_default > 0 {
            log::warn!("dropped {dropped_default} default-route entries");
        }
        let index = entries.iter().map(|&p| (p, ())).collect();
        RoutingTable {
            entries,
            index,
            dropped_default,
        }
    }

    /// Keeps only the maximal prefixes: every entry covered by another entry
    /// is removed, so each input address is covered by exactly one result.
    pub fn aggregate<I: IntoIterator<Item = Prefix>>(prefixes: I) -> Self {
        let raw = Self::from_prefixes(prefixes);
        let mut kept: Vec<Prefix> = Vec::with_capacity(raw.entries.len());
        // Sorted by (base, len): a covered entry always follows its cover, and
        // kept covers are disjoint, so comparing with the last one suffices.
        for p in raw.entries {
            match kept.last() {
                Some(last) if last.covers(p) => {}
                _ => kept.push(p),
            }
        }
        let index = kept.iter().map(|&p| (p, ())).collect();
        RoutingTable {
            entries: kept,
            index,
            dropped_default: raw.dropped_default,
        }
    }

    /// Returns the longest entry containing `ip`.
    pub fn lpm_lookup(&self, ip: Ip4) -> Option<Prefix> {
        self.index.longest_match(ip).map(|(p, _)| p)
    }

    /// Entries in ascending order.
    pub fn entries(&self) -> &[Prefix] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dropped_default_routes(&self) -> usize {
        self.dropped_default
    }

    /// True when no entry is contained in another.
    pub fn is_aggregated(&self) -> bool {
        self.entries.windows(2).all(|w| !w[0].covers(w[1]))
    }
}

/// Parses one `a.b.c.d/len` per line; blank lines and `#` comments are
/// skipped. Errors carry the 1-based line number.
pub fn parse_prefix_lines(text: &str) -> Result<Vec<Prefix>, NetError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let p = line.parse::<Prefix>().map_err(|e| NetError::Line {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}
