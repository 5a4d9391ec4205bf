use crate::net::{parse_prefix_lines, Ip4, NetError, Prefix, RoutingTable};

/// Opt-out list. Stored as disjoint, sorted ranges.
#[derive(Debug, Clone, Default)]
pub struct ExclusionList {
    ranges: Vec<(u32, u32)>,
    cidrs: Vec<Prefix>,
}

impl ExclusionList {
    pub fn new<I: IntoIterator<Item = Prefix>>(cidrs: I) -> Self {
        let cidrs: Vec<Prefix> = cidrs.into_iter().collect();
        // a /0 exclusion is legitimate here, so avoid RoutingTable's default-route drop
        let mut sorted = cidrs.clone();
        sorted.sort_unstable();
        let mut ranges: Vec<(u32, u32)> = Vec::new();
        for p in sorted {
            let (lo, hi) = (p.base().0, p.last().0);
            match ranges.last_mut() {
                Some(last) if lo as u64 <= last.1 as u64 + 1 => last.1 = last.1.max(hi),
                _ => ranges.push((lo, hi)),
            }
        }
        ExclusionList { ranges, cidrs }
    }

    /// One CIDR per line, `#` comments allowed.
    pub fn parse(text: &str) -> Result<Self, NetError> {
        Ok(Self::new(parse_prefix_lines(text)?))
    }

    pub fn contains(&self, ip: Ip4) -> bool {
        self.range_containing(ip).is_some()
    }

    /// The excluded range holding `ip`, as inclusive bounds.
    pub(crate) fn range_containing(&self, ip: Ip4) -> Option<(u32, u32)> {
        let i = self.ranges.partition_point(|r| r.0 <= ip.0);
        let r = *self.ranges.get(i.checked_sub(1)?)?;
        (ip.0 <= r.1).then_some(r)
    }

    pub fn cidrs(&self) -> &[Prefix] {
        &self.cidrs
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Total excluded addresses.
    pub fn address_count(&self) -> u64 {
        self.ranges.iter().map(|r| (r.1 - r.0) as u64 + 1).sum()
    }

    /// True if every usable host of `table` is excluded. Jumps over excluded
    /// ranges instead of walking addresses.
    pub fn covers_all_hosts(&self, table: &RoutingTable) -> bool {
        table
            .entries()
            .iter()
            .all(|&p| self.first_free_host(p).is_none())
    }

    fn first_free_host(&self, p: Prefix) -> Option<Ip4> {
        let mut cur = p.base().0 as u64;
        let end = p.last().0 as u64;
        while cur <= end {
            let ip = Ip4(cur as u32);
            if !p.is_usable_host(ip) {
                cur += 1;
                continue;
            }
            match self.range_containing(ip) {
                Some((_, hi)) => cur = hi as u64 + 1,
                None => return Some(ip),
            }
        }
        None
    }
}
