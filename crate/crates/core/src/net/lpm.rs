use std::collections::HashMap;

use super::{Ip4, Prefix};

/// Longest-prefix-match index: one hash table per populated prefix length,
/// probed from the most specific length down.
#[derive(Debug, Clone)]
pub struct PrefixMap<V> {
    by_len: Vec<HashMap<u32, V>>,
    // populated lengths, longest first
    lens: Vec<u8>,
    count: usize,
}

impl<V> Default for PrefixMap<V> {
    fn default() -> Self {
        PrefixMap {
            by_len: (0..=32).map(|_| HashMap::new()).collect(),
            lens: Vec::new(),
            count: 0,
        }
    }
}

impl<V> PrefixMap<V> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `value` under `prefix`, returning the previous value.
    pub fn insert(&mut self, prefix: Prefix, value: V) -> Option<V> {
        let len = prefix.len();
        let old = self.by_len[len as usize].insert(prefix.base().0, value);
        if old.is_none() {
            self.count += 1;
            if let Err(pos) = self.lens.binary_search_by(|l| len.cmp(l)) {
                self.lens.insert(pos, len);
            }
        }
        old
    }

    pub fn get(&self, prefix: Prefix) -> Option<&V> {
        self.by_len[prefix.len() as usize].get(&prefix.base().0)
    }

    pub fn get_mut(&mut self, prefix: Prefix) -> Option<&mut V> {
        self.by_len[prefix.len() as usize].get_mut(&prefix.base().0)
    }

    /// The most specific entry containing `ip`.
    pub fn longest_match(&self, ip: Ip4) -> Option<(Prefix, &V)> {
        self.lens.iter().find_map(|&len| {
            let p = Prefix::truncating(ip, len);
            self.by_len[len as usize].get(&p.base().0).map(|v| (p, v))
        })
    }

    /// The most specific entry covering `prefix` (the prefix itself included).
    pub fn longest_cover(&self, prefix: Prefix) -> Option<(Prefix, &V)> {
        self.lens
            .iter()
            .filter(|&&len| len <= prefix.len())
            .find_map(|&len| {
                let p = Prefix::truncating(prefix.base(), len);
                self.by_len[len as usize].get(&p.base().0).map(|v| (p, v))
            })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Entries in ascending (base, length) order.
    pub fn iter(&self) -> impl Iterator<Item = (Prefix, &V)> {
        let mut all: Vec<(Prefix, &V)> = self
            .lens
            .iter()
            .flat_map(|&len| {
                self.by_len[len as usize]
                    .iter()
                    .map(move |(&b, v)| (Prefix::truncating(Ip4(b), len), v))
            })
            .collect();
        all.sort_by_key(|(p, _)| *p);
        all.into_iter()
    }
}

impl<V> FromIterator<(Prefix, V)> for PrefixMap<V> {
    fn from_iter<I: IntoIterator<Item = (Prefix, V)>>(iter: I) -> Self {
        let mut m = PrefixMap::new();
        for (p, v) in iter {
            m.insert(p, v);
        }
        m
    }
}
