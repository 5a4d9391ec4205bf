use crate::net::{Ip4, Prefix};

/// Addresses probed inside `prefix`, in ascending order. Never materialized,
/// so a /8 costs no memory.
///
/// Blocks of /24 or larger skip `.0` and `.255` of every constituent /24;
/// /25 to /30 skip their own network and broadcast addresses; /31 and /32 are
/// probed in full.
pub fn enumerate_hosts(prefix: Prefix) -> impl Iterator<Item = Ip4> {
    let lo = prefix.base().0 as u64;
    let hi = prefix.last().0 as u64;
    (lo..=hi)
        .map(|v| Ip4(v as u32))
        .filter(move |&ip| prefix.is_usable_host(ip))
}

/// Source address for the spoofed probe to `target`: the next usable host of
/// the same prefix, or the previous one when `target` is the last.
///
/// A /32 has no second host, so its enclosing /24 is used instead. Returns
/// `None` only if no neighbour exists there either.
pub fn spoof_source(target: Ip4, prefix: Prefix) -> Option<Ip4> {
    spoof_candidates(target, prefix).next()
}

/// Candidate spoofed sources in order of preference.
pub(crate) fn spoof_candidates(target: Ip4, prefix: Prefix) -> impl Iterator<Item = Ip4> {
    let scope = if prefix.len() == 32 {
        crate::net::to_slash24(target)
    } else {
        prefix
    };
    [target.checked_add(1), target.checked_sub(1)]
        .into_iter()
        .flatten()
        .filter(move |&ip| ip != target && scope.is_usable_host(ip))
}
