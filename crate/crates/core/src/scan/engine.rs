use std::collections::VecDeque;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::codec::{
    build_query, build_raw, decode_domain, parse_dns_response, DnsName, TxidKey, DNS_PORT,
};
use crate::net::Ip4;
use crate::plan::{ProbePair, Schedule, TokenBucket};
use crate::time::Timestamp;

use super::transport::{Datagram, Transport, TransportError, POLL_STEP};
use super::{ResponseSink, ScanResponse};

/// Engine settings that are not part of the schedule.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub scanner_ip: Ip4,
    /// Source port of every probe; responses are expected on it.
    pub source_port: u16,
    /// Delay between the spoofed probe and its unspoofed twin.
    pub pair_gap: Duration,
    /// How long to keep listening after the last send.
    pub grace: Duration,
    pub burst: f64,
    pub txid_key: TxidKey,
    /// Number of leading schedule pairs to skip, from a previous abort.
    pub resume_from: u64,
}

impl ScanConfig {
    pub fn new(scanner_ip: Ip4, txid_key: TxidKey) -> Self {
        ScanConfig {
            scanner_ip,
            source_port: 33_053,
            pair_gap: Duration::from_millis(50),
            grace: Duration::from_secs(60),
            burst: 100.0,
            txid_key,
            resume_from: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanRunReport {
    pub pairs: u64,
    pub sent: u64,
    pub received: u64,
    pub responses: u64,
    pub parse_rejects: u64,
    pub txid_mismatch: u64,
    pub foreign_port: u64,
    pub skipped_no_source: u64,
    pub forced_adjacent: u64,
    pub rate_achieved: f64,
    pub started: Timestamp,
    pub finished: Timestamp,
}

/// A scan stopped by a transport error. The sink keeps everything recorded
/// before the failure.
#[derive(Debug)]
pub struct ScanAbort {
    pub error: TransportError,
    pub report: ScanRunReport,
    /// Pass as `resume_from` to continue after the last pair whose spoofed
    /// probe went out.
    pub resume_cursor: u64,
    /// Pairs whose unspoofed twin was not yet sent.
    pub pending_unspoofed: Vec<ProbePair>,
}

impl std::fmt::Display for ScanAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "scan aborted after {} pairs: {}",
            self.resume_cursor, self.error
        )
    }
}

impl std::error::Error for ScanAbort {}

struct Run<'a, T, S> {
    cfg: &'a ScanConfig,
    zone: &'a DnsName,
    transport: &'a mut T,
    sink: &'a mut S,
    bucket: TokenBucket,
    report: ScanRunReport,
    first_send: Option<Timestamp>,
    last_send: Timestamp,
}

impl<T: Transport, S: ResponseSink> Run<'_, T, S> {
    fn send(&mut self, pair: &ProbePair, spoofed: bool) -> Result<(), TransportError> {
        let (src, domain) = if spoofed {
            (pair.spoofed_src, &pair.spoofed_domain)
        } else {
            (self.cfg.scanner_ip, &pair.unspoofed_domain)
        };
        let txid = self.cfg.txid_key.txid(pair.target, domain.scan);
        let payload = build_query(domain, txid).encode();
        let bytes = build_raw(src, pair.target, self.cfg.source_port, DNS_PORT, &payload)
            .expect("probe fits in one datagram");
        let at = self.bucket.reserve(self.transport.now());
        self.transport.wait_until(at)?;
        self.transport.send(&bytes, pair.target)?;
        self.report.sent += 1;
        self.last_send = self.transport.now();
        self.first_send.get_or_insert(self.last_send);
        Ok(())
    }

    fn drain(&mut self) -> Result<(), TransportError> {
        while let Some(d) = self.transport.recv()? {
            self.report.received += 1;
            self.handle(d);
        }
        Ok(())
    }

    fn handle(&mut self, d: Datagram) {
        if d.sport != DNS_PORT {
            self.report.foreign_port += 1;
            return;
        }
        let Ok(info) = parse_dns_response(d.src, &d.payload) else {
            self.report.parse_rejects += 1;
            return;
        };
        let Ok(dec) = decode_domain(&info.qname, self.zone) else {
            self.report.parse_rejects += 1;
            return;
        };
        if self.cfg.txid_key.txid(dec.target, dec.scan) != info.txid {
            self.report.txid_mismatch += 1;
            return;
        }
        let resp = ScanResponse {
            queried: dec.target,
            responder: info.responder,
            rcode: info.rcode,
            domain: info.qname.to_lowercase_string(),
            ts: d.ts,
        };
        match self.sink.record(&resp) {
            Ok(()) => self.report.responses += 1,
            Err(e) => warn!("sink write failed: {e}"),
        }
    }
}

/// Sends every pair of `schedule` (spoofed probe, then the unspoofed twin
/// `pair_gap` later), paced by a token bucket, and records matching
/// responses in `sink`. Nothing is retransmitted.
pub fn run_scan<T: Transport, S: ResponseSink>(
    schedule: &Schedule,
    cfg: &ScanConfig,
    transport: &mut T,
    sink: &mut S,
) -> Result<ScanRunReport, Box<ScanAbort>> {
    let started = transport.now();
    let mut run = Run {
        cfg,
        zone: schedule.zone(),
        transport,
        sink,
        bucket: TokenBucket::new(schedule.rate(), cfg.burst),
        report: ScanRunReport {
            started,
            ..Default::default()
        },
        first_send: None,
        last_send: started,
    };
    let mut pairs = schedule.iter();
    let mut cursor = 0u64;
    for _ in pairs.by_ref().take(cfg.resume_from as usize) {
        cursor += 1;
    }
    let mut pending: VecDeque<(Timestamp, ProbePair)> = VecDeque::new();
    let mut exhausted = false;

    let result = loop {
        let now = run.transport.now();
        let step = if pending.front().is_some_and(|(due, _)| *due <= now) {
            let (_, pair) = pending.pop_front().expect("checked");
            run.send(&pair, false).map_err(|e| (e, Some(pair)))
        } else if !exhausted {
            match pairs.next() {
                Some(pair) => {
                    let r = run.send(&pair, true);
                    if r.is_ok() {
                        cursor += 1;
                        run.report.pairs += 1;
                        pending.push_back((run.last_send + cfg.pair_gap, pair));
                    }
                    r.map_err(|e| (e, None))
                }
                None => {
                    exhausted = true;
                    Ok(())
                }
            }
        } else if let Some((due, _)) = pending.front() {
            let due = *due;
            run.transport.wait_until(due).map_err(|e| (e, None))
        } else {
            break Ok(());
        };
        if let Err(e) = step.and_then(|_| run.drain().map_err(|e| (e, None))) {
            break Err(e);
        }
    };

    run.report.skipped_no_source = pairs.skipped_no_source();
    run.report.forced_adjacent = pairs.forced_adjacent();
    if let Some(first) = run.first_send {
        let secs = (run.last_send - first).as_secs_f64();
        run.report.rate_achieved = if secs > 0.0 {
            run.report.sent as f64 / secs
        } else {
            0.0
        };
    }

    if let Err((error, unsent)) = result {
        run.report.finished = run.transport.now();
        let mut pending_unspoofed: Vec<ProbePair> = unsent.into_iter().collect();
        pending_unspoofed.extend(pending.into_iter().map(|(_, p)| p));
        return Err(Box::new(ScanAbort {
            error,
            report: run.report,
            resume_cursor: cursor,
            pending_unspoofed,
        }));
    }

    let end = run.transport.now() + cfg.grace;
    debug!("all probes sent; listening until {end:?}");
    loop {
        let now = run.transport.now();
        if now >= end {
            break;
        }
        let step = (now + POLL_STEP).min(end);
        let r = run.transport.wait_until(step).and_then(|_| run.drain());
        if let Err(error) = r {
            run.report.finished = run.transport.now();
            return Err(Box::new(ScanAbort {
                error,
                report: run.report,
                resume_cursor: cursor,
                pending_unspoofed: Vec::new(),
            }));
        }
    }
    run.report.finished = run.transport.now();
    Ok(run.report)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::codec::RawPacket;
    use crate::net::RoutingTable;
    use crate::plan::{build_schedule, ExclusionList};
    use crate::scan::RecordingTransport;

    fn schedule() -> Schedule {
        let t =
            RoutingTable::aggregate(["1.2.3.0/24".parse().unwrap(), "5.6.7.0/28".parse().unwrap()]);
        build_schedule(
            &t,
            &ExclusionList::default(),
            &"z.test".parse().unwrap(),
            9,
            1000.0,
        )
        .unwrap()
    }

    fn cfg() -> ScanConfig {
        ScanConfig::new("9.9.9.9".parse().unwrap(), TxidKey::from_seed(1))
    }

    #[test]
    fn twin_follows_spoofed_with_gap() {
        let s = schedule();
        let mut tr = RecordingTransport::default();
        let mut sink = Vec::new();
        let rep = run_scan(&s, &cfg(), &mut tr, &mut sink).unwrap();
        assert_eq!(rep.pairs, 254 + 14);
        assert_eq!(rep.sent, 2 * rep.pairs);
        let mut spoofed_at = HashMap::new();
        for (i, (dst, bytes)) in tr.sent.iter().enumerate() {
            let p = RawPacket::parse(bytes).unwrap();
            assert_eq!(p.dst, *dst);
            if p.src == cfg().scanner_ip {
                let j = spoofed_at.remove(dst).expect("spoofed probe first");
                assert!(i > j);
            } else {
                assert!(spoofed_at.insert(*dst, i).is_none());
            }
        }
        assert!(spoofed_at.is_empty());
        // 536 packets at 1000 pps after a burst of 100, plus the 60 s grace
        let secs = (rep.finished - rep.started).as_secs_f64();
        assert!((60.4..61.0).contains(&secs), "{secs}");
    }

    #[test]
    fn abort_then_resume_covers_everything_once() {
        let s = schedule();
        let mut tr = RecordingTransport {
            fail_after: Some(101),
            ..Default::default()
        };
        let err = run_scan(&s, &cfg(), &mut tr, &mut Vec::new()).unwrap_err();
        let mut spoofed: Vec<Ip4> = Vec::new();
        let mut unspoofed: Vec<Ip4> = Vec::new();
        let mut split = |tr: &RecordingTransport| {
            for (dst, b) in &tr.sent {
                let p = RawPacket::parse(b).unwrap();
                if p.src == cfg().scanner_ip {
                    unspoofed.push(*dst)
                } else {
                    spoofed.push(*dst)
                }
            }
        };
        split(&tr);
        assert_eq!(err.report.sent, 101);
        let mut c = cfg();
        c.resume_from = err.resume_cursor;
        let mut tr2 = RecordingTransport::default();
        run_scan(&s, &c, &mut tr2, &mut Vec::new()).unwrap();
        split(&tr2);
        unspoofed.extend(err.pending_unspoofed.iter().map(|p| p.target));
        spoofed.sort();
        unspoofed.sort();
        assert_eq!(spoofed.len(), 268);
        assert_eq!(spoofed, unspoofed);
        spoofed.dedup();
        assert_eq!(spoofed.len(), 268);
    }
}
