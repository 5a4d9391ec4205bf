use std::collections::VecDeque;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{encode_domain, DnsName, Nonce, ProbeDomain, ScanId};
use crate::net::{to_slash24, Ip4, Prefix, RoutingTable};

use super::exclusion::ExclusionList;
use super::hosts::spoof_candidates;
use super::permute::IndexPermutation;
use super::PlanError;

/// Packets per second used when the operator does not choose one.
pub const DEFAULT_RATE_PPS: f64 = 10_000.0;

// Deferred entries held back to avoid adjacent same-/24 targets.
const MAX_DEFERRED: usize = 64;

/// One host to test: the spoofed probe followed by its unspoofed twin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbePair {
    pub target: Ip4,
    pub spoofed_src: Ip4,
    pub spoofed_domain: ProbeDomain,
    pub unspoofed_domain: ProbeDomain,
}

#[derive(Debug, Clone)]
enum Block {
    // one /24 inside a prefix of length <= 24: hosts .1 to .254
    Full { base: u32, prefix: Prefix },
    // a /24 holding one or more longer prefixes
    Partial { hosts: Vec<(Ip4, Prefix)> },
}

impl Block {
    fn host_count(&self) -> u64 {
        match self {
            Block::Full { .. } => 254,
            Block::Partial { hosts } => hosts.len() as u64,
        }
    }

    fn host(&self, j: u64) -> (Ip4, Prefix) {
        match self {
            Block::Full { base, prefix } => (Ip4(base + 1 + j as u32), *prefix),
            Block::Partial { hosts } => hosts[j as usize],
        }
    }

    fn key(&self) -> u32 {
        match self {
            Block::Full { base, .. } => *base,
            Block::Partial { hosts } => to_slash24(hosts[0].0).base().0,
        }
    }
}

/// The probed address space as an indexable list of /24 blocks. Prefixes of
/// /24 or larger are kept as runs and expanded lazily.
#[derive(Debug, Clone, Default)]
struct BlockIndex {
    // (prefix, index of its first block)
    runs: Vec<(Prefix, u64)>,
    run_blocks: u64,
    partials: Vec<Block>,
}

impl BlockIndex {
    fn new(table: &RoutingTable) -> Self {
        let mut idx = BlockIndex::default();
        let mut partial: Option<(u32, Vec<(Ip4, Prefix)>)> = None;
        for &p in table.entries() {
            if p.len() <= 24 {
                idx.runs.push((p, idx.run_blocks));
                idx.run_blocks += 1 << (24 - p.len());
                continue;
            }
            let key = p.base().0 & 0xffff_ff00;
            if partial.as_ref().is_some_and(|(k, _)| *k != key) {
                let (_, hosts) = partial.take().expect("checked");
                idx.partials.push(Block::Partial { hosts });
            }
            let hosts = &mut partial.get_or_insert_with(|| (key, Vec::new())).1;
            hosts.extend(super::enumerate_hosts(p).map(|h| (h, p)));
        }
        if let Some((_, hosts)) = partial {
            idx.partials.push(Block::Partial { hosts });
        }
        idx.partials.retain(|b| b.host_count() > 0);
        idx
    }

    fn len(&self) -> u64 {
        self.run_blocks + self.partials.len() as u64
    }

    fn max_hosts(&self) -> u64 {
        if self.run_blocks > 0 {
            254
        } else {
            self.partials
                .iter()
                .map(Block::host_count)
                .max()
                .unwrap_or(0)
        }
    }

    fn block(&self, i: u64) -> Block {
        if i < self.run_blocks {
            let r = self.runs.partition_point(|(_, first)| *first <= i) - 1;
            let (prefix, first) = self.runs[r];
            Block::Full {
                base: prefix.base().0 + ((i - first) as u32) * 256,
                prefix,
            }
        } else {
            self.partials[(i - self.run_blocks) as usize].clone()
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A seeded, streaming probe order over every non-excluded host of an
/// aggregated table.
///
/// Hosts are drawn round by round: round `r` visits every /24 block once in a
/// fresh permutation and takes that block's `r`-th host (itself permuted). So
/// consecutive entries hit different /24s except across round boundaries,
/// which a small look-ahead buffer repairs.
#[derive(Debug, Clone)]
pub struct Schedule {
    blocks: BlockIndex,
    exclusion: ExclusionList,
    zone: DnsName,
    seed: u64,
    rate: f64,
    scan_seq: u16,
}

/// Builds the schedule for `table`, which must be aggregated.
pub fn build_schedule(
    table: &RoutingTable,
    exclusion: &ExclusionList,
    zone: &DnsName,
    seed: u64,
    rate: f64,
) -> Result<Schedule, PlanError> {
    if !table.is_aggregated() {
        return Err(PlanError::NotAggregated);
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(PlanError::BadRate(rate));
    }
    // surfaces a zone too long to carry probe labels before any work
    encode_domain(
        Nonce::new("AAAAAA").expect("valid"),
        Ip4(0),
        ScanId::spoofed(u16::MAX),
        zone,
    )?;
    if table.is_empty() || exclusion.covers_all_hosts(table) {
        return Err(PlanError::EmptyTargets);
    }
    Ok(Schedule {
        blocks: BlockIndex::new(table),
        exclusion: exclusion.clone(),
        zone: zone.clone(),
        seed,
        rate,
        scan_seq: 1,
    })
}

impl Schedule {
    /// Sets the scan sequence number carried in `s<seq>`/`n<seq>` labels.
    pub fn with_scan_seq(mut self, seq: u16) -> Self {
        self.scan_seq = seq;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn zone(&self) -> &DnsName {
        &self.zone
    }

    pub fn scan_seq(&self) -> u16 {
        self.scan_seq
    }

    pub fn iter(&self) -> ScheduleIter<'_> {
        ScheduleIter {
            targets: TargetIter {
                sched: self,
                round: 0,
                rounds: self.blocks.max_hosts(),
                k: 0,
                perm: IndexPermutation::new(self.blocks.len(), mix(self.seed)),
                skipped_no_source: 0,
            },
            deferred: VecDeque::new(),
            last_key: None,
            forced_adjacent: 0,
            rng: ChaCha8Rng::seed_from_u64(mix(self.seed ^ 0x6e6f_6e63_6573)),
        }
    }

    /// Writes the `--dry-run` CSV: `target,spoofed_src,spoofed_domain,unspoofed_domain`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<u64> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "target",
            "spoofed_src",
            "spoofed_domain",
            "unspoofed_domain",
        ])?;
        let mut n = 0;
        for p in self.iter() {
            w.write_record([
                p.target.to_string(),
                p.spoofed_src.to_string(),
                p.spoofed_domain.to_string(),
                p.unspoofed_domain.to_string(),
            ])?;
            n += 1;
        }
        w.flush()?;
        Ok(n)
    }
}

#[derive(Debug, Clone, Copy)]
struct Target {
    ip: Ip4,
    src: Ip4,
    key: u32,
}

struct TargetIter<'a> {
    sched: &'a Schedule,
    round: u64,
    rounds: u64,
    k: u64,
    perm: IndexPermutation,
    skipped_no_source: u64,
}

impl Iterator for TargetIter<'_> {
    type Item = Target;

    fn next(&mut self) -> Option<Target> {
        let s = self.sched;
        while self.round < self.rounds {
            if self.k >= self.perm.len() {
                self.round += 1;
                self.k = 0;
                self.perm = IndexPermutation::new(s.blocks.len(), mix(s.seed ^ mix(self.round)));
                continue;
            }
            let block = s.blocks.block(self.perm.apply(self.k));
            self.k += 1;
            let n = block.host_count();
            if self.round >= n {
                continue;
            }
            let key = block.key();
            let hp = IndexPermutation::new(n, mix(s.seed ^ (key as u64) << 8));
            let (ip, prefix) = block.host(hp.apply(self.round));
            if s.exclusion.contains(ip) {
                continue;
            }
            let Some(src) = spoof_candidates(ip, prefix).find(|c| !s.exclusion.contains(*c)) else {
                self.skipped_no_source += 1;
                continue;
            };
            return Some(Target { ip, src, key });
        }
        None
    }
}

/// Iterator over the probe pairs of a [`Schedule`].
pub struct ScheduleIter<'a> {
    targets: TargetIter<'a>,
    deferred: VecDeque<Target>,
    last_key: Option<u32>,
    forced_adjacent: u64,
    rng: ChaCha8Rng,
}

impl ScheduleIter<'_> {
    /// Entries emitted next to one of the same /24 because nothing else was
    /// left to interleave.
    pub fn forced_adjacent(&self) -> u64 {
        self.forced_adjacent
    }

    /// Targets dropped because every candidate spoofed source was excluded.
    pub fn skipped_no_source(&self) -> u64 {
        self.targets.skipped_no_source
    }

    fn next_target(&mut self) -> Option<Target> {
        let last = self.last_key;
        if let Some(i) = self.deferred.iter().position(|t| Some(t.key) != last) {
            return self.deferred.remove(i);
        }
        while self.deferred.len() < MAX_DEFERRED {
            match self.targets.next() {
                Some(t) if Some(t.key) != last => return Some(t),
                Some(t) => self.deferred.push_back(t),
                None => break,
            }
        }
        let t = self.deferred.pop_front()?;
        self.forced_adjacent += 1;
        Some(t)
    }
}

impl Iterator for ScheduleIter<'_> {
    type Item = ProbePair;

    fn next(&mut self) -> Option<ProbePair> {
        let t = self.next_target()?;
        self.last_key = Some(t.key);
        let s = self.targets.sched;
        let seq = s.scan_seq;
        let spoofed_nonce = Nonce::random(&mut self.rng);
        let unspoofed_nonce = Nonce::random(&mut self.rng);
        // zone length was validated in build_schedule
        let spoofed_domain = encode_domain(spoofed_nonce, t.ip, ScanId::spoofed(seq), &s.zone)
            .expect("zone validated");
        let unspoofed_domain =
            encode_domain(unspoofed_nonce, t.ip, ScanId::unspoofed(seq), &s.zone)
                .expect("zone validated");
        Some(ProbePair {
            target: t.ip,
            spoofed_src: t.src,
            spoofed_domain,
            unspoofed_domain,
        })
    }
}
