use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Duration;

use log::warn;
use serde::Serialize;

use crate::codec::dns::{TYPE_A, TYPE_NS, TYPE_SOA};
use crate::codec::{DnsMessage, DnsName, Flags, RData, Rcode, ResourceRecord};
use crate::net::Ip4;
use crate::time::Timestamp;

use super::log::{LogEntry, ObservationSink};

#[derive(Debug, Clone)]
pub struct CollectorConfig {
    pub zone: DnsName,
    /// Address returned for every A query in the zone.
    pub answer: Ip4,
    pub ttl: u32,
}

impl CollectorConfig {
    pub fn new(zone: DnsName, answer: Ip4) -> Self {
        CollectorConfig {
            zone,
            answer,
            ttl: 60,
        }
    }
}

#[derive(Debug, Default)]
struct Counters {
    served: AtomicU64,
    logged: AtomicU64,
    refused: AtomicU64,
    malformed: AtomicU64,
    log_errors: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CollectorStats {
    /// Queries answered, including REFUSED ones.
    pub served: u64,
    /// In-zone A queries appended to the log.
    pub logged: u64,
    pub refused: u64,
    pub malformed: u64,
    pub log_errors: u64,
}

/// Stateless query handler shared by the UDP server and the simulator.
#[derive(Debug)]
pub struct AuthCollector {
    cfg: CollectorConfig,
    counters: Counters,
}

impl AuthCollector {
    pub fn new(cfg: CollectorConfig) -> Self {
        AuthCollector {
            cfg,
            counters: Counters::default(),
        }
    }

    pub fn config(&self) -> &CollectorConfig {
        &self.cfg
    }

    pub fn stats(&self) -> CollectorStats {
        let c = &self.counters;
        CollectorStats {
            served: c.served.load(Ordering::Relaxed),
            logged: c.logged.load(Ordering::Relaxed),
            refused: c.refused.load(Ordering::Relaxed),
            malformed: c.malformed.load(Ordering::Relaxed),
            log_errors: c.log_errors.load(Ordering::Relaxed),
        }
    }

    /// Answers one query datagram from `src`. In-zone A queries are logged.
    /// Returns `None` for input that is not a usable query.
    pub fn handle(
        &self,
        src: Ip4,
        bytes: &[u8],
        ts: Timestamp,
        log: &dyn ObservationSink,
    ) -> Option<Vec<u8>> {
        let q = match DnsMessage::decode(bytes) {
            Ok(q) if !q.flags.qr && q.flags.opcode == 0 => q,
            _ => {
                self.counters.malformed.fetch_add(1, Ordering::Relaxed);
                return None;
            }
        };
        self.counters.served.fetch_add(1, Ordering::Relaxed);
        let name = &q.question.name;
        let mut flags = Flags {
            qr: true,
            rd: q.flags.rd,
            ..Flags::default()
        };
        let mut answers = Vec::new();
        if !name.is_within(&self.cfg.zone) {
            self.counters.refused.fetch_add(1, Ordering::Relaxed);
            flags.rcode = Rcode::Refused.to_u8();
        } else {
            flags.aa = true;
            let apex = name == &self.cfg.zone;
            match q.question.qtype {
                TYPE_A => {
                    let entry = LogEntry {
                        src,
                        name: name.to_string(),
                        ts,
                    };
                    match log.append(&entry) {
                        Ok(()) => self.counters.logged.fetch_add(1, Ordering::Relaxed),
                        Err(e) => {
                            warn!("log append failed: {e}");
                            self.counters.log_errors.fetch_add(1, Ordering::Relaxed)
                        }
                    };
                    answers.push(ResourceRecord::a(
                        name.clone(),
                        self.cfg.ttl,
                        self.cfg.answer,
                    ));
                }
                TYPE_SOA if apex => answers.push(self.soa()),
                TYPE_NS if apex => answers.push(self.ns()),
                _ => {}
            }
        }
        let resp = DnsMessage {
            id: q.id,
            flags,
            question: q.question,
            answers,
        };
        Some(resp.encode())
    }

    fn ns_name(&self) -> DnsName {
        let mut labels = vec![b"ns".to_vec()];
        labels.extend(self.cfg.zone.labels().iter().cloned());
        DnsName::from_labels(labels).unwrap_or_else(|_| self.cfg.zone.clone())
    }

    fn soa(&self) -> ResourceRecord {
        let mut hostmaster = vec![b"hostmaster".to_vec()];
        hostmaster.extend(self.cfg.zone.labels().iter().cloned());
        ResourceRecord {
            name: self.cfg.zone.clone(),
            rtype: TYPE_SOA,
            class: crate::codec::dns::CLASS_IN,
            ttl: self.cfg.ttl,
            data: RData::Soa {
                mname: self.ns_name(),
                rname: DnsName::from_labels(hostmaster).unwrap_or_else(|_| self.cfg.zone.clone()),
                serial: 1,
                refresh: 3600,
                retry: 600,
                expire: 86_400,
                minimum: self.cfg.ttl,
            },
        }
    }

    fn ns(&self) -> ResourceRecord {
        ResourceRecord {
            name: self.cfg.zone.clone(),
            rtype: TYPE_NS,
            class: crate::codec::dns::CLASS_IN,
            ttl: self.cfg.ttl,
            data: RData::Ns(self.ns_name()),
        }
    }
}

/// Serves `socket` with `workers` threads until `stop` is set.
pub fn serve(
    socket: &UdpSocket,
    collector: &AuthCollector,
    log: &dyn ObservationSink,
    workers: usize,
    stop: &AtomicBool,
) -> io::Result<()> {
    socket.set_read_timeout(Some(Duration::from_millis(200)))?;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers.max(1))
            .map(|_| {
                let sock = socket.try_clone()?;
                Ok(s.spawn(move || worker(&sock, collector, log, stop)))
            })
            .collect::<io::Result<_>>()?;
        for h in handles {
            h.join().expect("worker panicked")?;
        }
        Ok(())
    })
}

fn worker(
    sock: &UdpSocket,
    collector: &AuthCollector,
    log: &dyn ObservationSink,
    stop: &AtomicBool,
) -> io::Result<()> {
    let mut buf = [0u8; 1500];
    while !stop.load(Ordering::Relaxed) {
        let (n, from) = match sock.recv_from(&mut buf) {
            Ok(x) => x,
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                continue
            }
            Err(e) if e.kind() == io::ErrorKind::ConnectionReset => continue,
            Err(e) => return Err(e),
        };
        let SocketAddr::V4(from) = from else { continue };
        let src = Ip4(u32::from(*from.ip()));
        if let Some(resp) = collector.handle(src, &buf[..n], Timestamp::now(), log) {
            if let Err(e) = sock.send_to(&resp, from) {
                warn!("reply to {from} failed: {e}");
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{CodecError, Question};
    use crate::collector::MemoryLog;

    fn collector() -> AuthCollector {
        AuthCollector::new(CollectorConfig::new(
            "zone.test".parse().unwrap(),
            "192.0.2.1".parse().unwrap(),
        ))
    }

    fn query(name: &str, qtype: u16) -> Vec<u8> {
        DnsMessage {
            id: 7,
            flags: Flags {
                rd: true,
                ..Flags::default()
            },
            question: Question {
                name: name.parse().unwrap(),
                qtype,
                qclass: 1,
            },
            answers: vec![],
        }
        .encode()
    }

    fn ask(
        c: &AuthCollector,
        log: &MemoryLog,
        name: &str,
        qtype: u16,
    ) -> Result<DnsMessage, CodecError> {
        let r = c
            .handle(
                "9.9.9.9".parse().unwrap(),
                &query(name, qtype),
                Timestamp(5),
                log,
            )
            .unwrap();
        DnsMessage::decode(&r)
    }

    #[test]
    fn a_query_logged_and_answered() {
        let c = collector();
        let log = MemoryLog::new();
        let r = ask(&c, &log, "abcdef.01020304.s1.zone.test", TYPE_A).unwrap();
        assert!(r.flags.qr && r.flags.aa);
        assert_eq!(r.id, 7);
        assert_eq!(r.flags.rcode(), Rcode::NoError);
        assert_eq!(r.answers[0].data, RData::A("192.0.2.1".parse().unwrap()));
        assert_eq!(r.answers[0].ttl, 60);
        let e = log.snapshot();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].src, "9.9.9.9".parse().unwrap());
        assert_eq!(e[0].name, "abcdef.01020304.s1.zone.test");
    }

    #[test]
    fn foreign_zone_refused_unlogged() {
        let c = collector();
        let log = MemoryLog::new();
        let r = ask(&c, &log, "abcdef.01020304.s1.other.test", TYPE_A).unwrap();
        assert_eq!(r.flags.rcode(), Rcode::Refused);
        assert!(r.answers.is_empty());
        assert!(log.is_empty());
        assert_eq!(c.stats().refused, 1);
    }

    #[test]
    fn apex_records() {
        let c = collector();
        let log = MemoryLog::new();
        let soa = ask(&c, &log, "zone.test", TYPE_SOA).unwrap();
        assert!(matches!(soa.answers[0].data, RData::Soa { .. }));
        let ns = ask(&c, &log, "zone.test", TYPE_NS).unwrap();
        assert_eq!(
            ns.answers[0].data,
            RData::Ns("ns.zone.test".parse().unwrap())
        );
        let nodata = ask(&c, &log, "x.zone.test", 16).unwrap();
        assert!(nodata.answers.is_empty());
        assert_eq!(nodata.flags.rcode(), Rcode::NoError);
        assert!(log.is_empty());
    }

    #[test]
    fn malformed_counted() {
        let c = collector();
        let log = MemoryLog::new();
        assert!(c.handle(Ip4(1), &[1, 2, 3], Timestamp(0), &log).is_none());
        let mut resp = query("a.zone.test", TYPE_A);
        resp[2] |= 0x80;
        assert!(c.handle(Ip4(1), &resp, Timestamp(0), &log).is_none());
        assert_eq!(c.stats().malformed, 2);
        assert_eq!(c.stats().served, 0);
    }

    #[test]
    fn udp_server_round_trip() {
        let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
        let addr = sock.local_addr().unwrap();
        let c = collector();
        let log = MemoryLog::new();
        let stop = AtomicBool::new(false);
        std::thread::scope(|s| {
            let h = s.spawn(|| serve(&sock, &c, &log, 2, &stop));
            let client = UdpSocket::bind("127.0.0.1:0").unwrap();
            client
                .set_read_timeout(Some(Duration::from_secs(5)))
                .unwrap();
            client
                .send_to(&query("abcdef.01020304.s1.zone.test", TYPE_A), addr)
                .unwrap();
            let mut buf = [0u8; 512];
            let n = client.recv(&mut buf).unwrap();
            let r = DnsMessage::decode(&buf[..n]).unwrap();
            assert_eq!(r.answers.len(), 1);
            stop.store(true, Ordering::Relaxed);
            h.join().unwrap().unwrap();
        });
        assert_eq!(log.len(), 1);
        assert_eq!(log.snapshot()[0].src, "127.0.0.1".parse().unwrap());
    }
}
