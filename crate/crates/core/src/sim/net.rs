use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codec::{DnsMessage, DnsName, Flags, RawPacket, Rcode, DNS_PORT};
use crate::collector::{AuthCollector, CollectorConfig, CollectorStats, LogEntry, MemoryLog};
use crate::net::{Ip4, PrefixMap};
use crate::scan::{Datagram, Transport, TransportError};
use crate::time::Timestamp;

use super::topology::{ResolverMode, Scope, SimResolver, SimTopology};

/// Latency of every simulated hop.
pub const HOP_DELAY: Duration = Duration::from_millis(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Source forged and the sending network filters outbound.
    OutboundSav,
    /// Source forged and a transit network filtered it.
    Transit,
    /// Source inside the destination network, arriving from outside.
    InboundSav,
    Loss,
    Unroutable,
}

/// Observable simulator effects, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Dropped {
        src: Ip4,
        dst: Ip4,
        reason: DropReason,
    },
    /// A resolver accepted a query and started resolving.
    Accepted {
        resolver: Ip4,
        client: Ip4,
    },
    Refused {
        resolver: Ip4,
        client: Ip4,
    },
    AuthArrival {
        src: Ip4,
        name: String,
    },
    ToScanner {
        src: Ip4,
    },
    /// Delivered to a host that does not answer DNS.
    Absorbed {
        src: Ip4,
        dst: Ip4,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SimStats {
    pub injected: u64,
    pub malformed_injections: u64,
    pub delivered: u64,
    pub dropped: BTreeMap<DropReason, u64>,
    pub auth_arrivals: u64,
    pub to_scanner: u64,
}

#[derive(Debug, Clone)]
struct Packet {
    src: Ip4,
    dst: Ip4,
    sport: u16,
    dport: u16,
    payload: Vec<u8>,
    /// Network the packet physically leaves from.
    origin: usize,
    /// Query relayed by a forwarder; upstreams serve these regardless of
    /// scope.
    relayed: bool,
}

struct Event {
    at: Timestamp,
    seq: u64,
    pkt: Packet,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        (self.at, self.seq) == (o.at, o.seq)
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Event {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(o.at, o.seq))
    }
}

struct Pending {
    client: Ip4,
    client_port: u16,
    client_txid: u16,
}

/// Deterministic event-driven internet implementing [`Transport`] for the
/// scanner.
pub struct SimNet {
    topo: SimTopology,
    nets: PrefixMap<usize>,
    resolvers: HashMap<Ip4, (usize, SimResolver)>,
    scanner_ip: Ip4,
    auth_ip: Ip4,
    scanner_idx: usize,
    collector: AuthCollector,
    log: MemoryLog,
    rng: ChaCha8Rng,
    clock: Timestamp,
    seq: u64,
    queue: BinaryHeap<Reverse<Event>>,
    inbox: VecDeque<Datagram>,
    pending: HashMap<(Ip4, u16), Pending>,
    next_txid: HashMap<Ip4, u16>,
    trace: Option<Vec<TraceEvent>>,
    stats: SimStats,
}

impl SimNet {
    /// `seed` drives every random choice; `zone` is served by the simulated
    /// authoritative server.
    pub fn new(topo: SimTopology, zone: DnsName, seed: u64) -> Self {
        let nets = topo.network_index();
        let resolvers = topo
            .all_networks()
            .enumerate()
            .flat_map(|(i, n)| n.resolvers.iter().map(move |r| (r.ip, (i, r.clone()))))
            .collect();
        let scanner_ip = topo.scanner_ip();
        let auth_ip = topo.auth_ip();
        let collector = AuthCollector::new(CollectorConfig::new(zone, auth_ip));
        SimNet {
            scanner_idx: topo.networks.len(),
            nets,
            resolvers,
            scanner_ip,
            auth_ip,
            collector,
            log: MemoryLog::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock: Timestamp(0),
            seq: 0,
            queue: BinaryHeap::new(),
            inbox: VecDeque::new(),
            pending: HashMap::new(),
            next_txid: HashMap::new(),
            trace: None,
            stats: SimStats::default(),
            topo,
        }
    }

    /// Records a [`TraceEvent`] for every effect.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn scanner_ip(&self) -> Ip4 {
        self.scanner_ip
    }

    pub fn auth_ip(&self) -> Ip4 {
        self.auth_ip
    }

    pub fn topology(&self) -> &SimTopology {
        &self.topo
    }

    pub fn auth_log(&self) -> Vec<LogEntry> {
        self.log.snapshot()
    }

    pub fn collector_stats(&self) -> CollectorStats {
        self.collector.stats()
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    fn record(&mut self, e: TraceEvent) {
        if let Some(t) = &mut self.trace {
            t.push(e);
        }
    }

    fn drop_pkt(&mut self, p: &Packet, reason: DropReason) {
        *self.stats.dropped.entry(reason).or_default() += 1;
        self.record(TraceEvent::Dropped {
            src: p.src,
            dst: p.dst,
            reason,
        });
    }

    /// Puts a packet on the wire from network `origin`.
    fn emit(&mut self, pkt: Packet) {
        self.seq += 1;
        self.queue.push(Reverse(Event {
            at: self.clock + HOP_DELAY,
            seq: self.seq,
            pkt,
        }));
    }

    fn net_of(&self, ip: Ip4) -> Option<usize> {
        self.nets.longest_match(ip).map(|(_, i)| *i)
    }

    fn network(&self, i: usize) -> &super::SimNetwork {
        if i == self.scanner_idx {
            &self.topo.scanner_net
        } else {
            &self.topo.networks[i]
        }
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        p > 0.0 && self.rng.random::<f64>() < p
    }

    fn deliver(&mut self, p: Packet) {
        let origin = self.network(p.origin);
        let forged = !origin.prefix.contains(p.src);
        if forged && origin.outbound_sav {
            return self.drop_pkt(&p, DropReason::OutboundSav);
        }
        let Some(dst_idx) = self.net_of(p.dst) else {
            return self.drop_pkt(&p, DropReason::Unroutable);
        };
        let crosses_edge = dst_idx != p.origin;
        if crosses_edge && forged && self.bernoulli(self.topo.transit_filter) {
            return self.drop_pkt(&p, DropReason::Transit);
        }
        let dst_net = self.network(dst_idx);
        let (loss, inbound_sav, dst_prefix) = (dst_net.loss, dst_net.inbound_sav, dst_net.prefix);
        if self.bernoulli(loss) {
            return self.drop_pkt(&p, DropReason::Loss);
        }
        if crosses_edge && inbound_sav && dst_prefix.contains(p.src) {
            return self.drop_pkt(&p, DropReason::InboundSav);
        }
        self.stats.delivered += 1;
        if p.dst == self.scanner_ip {
            self.stats.to_scanner += 1;
            self.record(TraceEvent::ToScanner { src: p.src });
            self.inbox.push_back(Datagram {
                src: p.src,
                sport: p.sport,
                payload: p.payload,
                ts: self.clock,
            });
        } else if p.dport != DNS_PORT {
            self.record(TraceEvent::Absorbed {
                src: p.src,
                dst: p.dst,
            });
        } else if p.dst == self.auth_ip {
            self.at_auth(p);
        } else if let Some((net, r)) = self.resolvers.get(&p.dst).cloned() {
            self.at_resolver(net, &r, p);
        } else {
            self.record(TraceEvent::Absorbed {
                src: p.src,
                dst: p.dst,
            });
        }
    }

    fn at_auth(&mut self, p: Packet) {
        let now = self.clock;
        let Some(resp) = self.collector.handle(p.src, &p.payload, now, &self.log) else {
            return;
        };
        if let Ok(m) = DnsMessage::decode(&p.payload) {
            self.stats.auth_arrivals += 1;
            let name = m.question.name.to_string();
            self.record(TraceEvent::AuthArrival { src: p.src, name });
        }
        let origin = self.scanner_idx;
        self.emit(Packet {
            src: self.auth_ip,
            dst: p.src,
            sport: DNS_PORT,
            dport: p.sport,
            payload: resp,
            origin,
            relayed: false,
        });
    }

    fn txid_for(&mut self, resolver: Ip4) -> u16 {
        let t = self.next_txid.entry(resolver).or_insert(0);
        *t = t.wrapping_add(1);
        *t
    }

    fn at_resolver(&mut self, net: usize, r: &SimResolver, p: Packet) {
        let Ok(msg) = DnsMessage::decode(&p.payload) else {
            return self.record(TraceEvent::Absorbed {
                src: p.src,
                dst: p.dst,
            });
        };
        if msg.flags.qr {
            return self.relay_answer(net, r, msg);
        }
        let lan = self.network(net).prefix.contains(p.src);
        let allowed = p.relayed
            || match r.scope {
                Scope::Open => true,
                Scope::Closed => lan,
                Scope::RefusesOwnLan => !lan,
            };
        if !allowed {
            self.record(TraceEvent::Refused {
                resolver: r.ip,
                client: p.src,
            });
            let refused = DnsMessage {
                id: msg.id,
                flags: Flags {
                    qr: true,
                    rd: msg.flags.rd,
                    ra: true,
                    rcode: Rcode::Refused.to_u8(),
                    ..Flags::default()
                },
                question: msg.question,
                answers: Vec::new(),
            };
            return self.emit(Packet {
                src: r.ip,
                dst: p.src,
                sport: DNS_PORT,
                dport: p.sport,
                payload: refused.encode(),
                origin: net,
                relayed: false,
            });
        }
        self.record(TraceEvent::Accepted {
            resolver: r.ip,
            client: p.src,
        });
        match r.mode {
            ResolverMode::Forwarder {
                upstream,
                rewrites_source: false,
            } => {
                // relays the client's datagram unchanged; the upstream
                // answers the client directly
                self.emit(Packet {
                    dst: upstream,
                    origin: net,
                    relayed: true,
                    ..p
                });
            }
            mode => {
                let (next, relayed) = match mode {
                    ResolverMode::Forwarder { upstream, .. } => (upstream, true),
                    ResolverMode::NonForwarder => (self.auth_ip, false),
                };
                let repeats = if relayed {
                    1
                } else {
                    self.topo.repeat_queries.max(1)
                };
                for _ in 0..repeats {
                    let txid = self.txid_for(r.ip);
                    self.pending.insert(
                        (r.ip, txid),
                        Pending {
                            client: p.src,
                            client_port: p.sport,
                            client_txid: msg.id,
                        },
                    );
                    let q = DnsMessage {
                        id: txid,
                        flags: Flags {
                            rd: relayed,
                            ..Flags::default()
                        },
                        question: msg.question.clone(),
                        answers: Vec::new(),
                    };
                    self.emit(Packet {
                        src: r.ip,
                        dst: next,
                        sport: DNS_PORT,
                        dport: DNS_PORT,
                        payload: q.encode(),
                        origin: net,
                        relayed,
                    });
                }
            }
        }
    }

    fn relay_answer(&mut self, net: usize, r: &SimResolver, msg: DnsMessage) {
        let Some(pend) = self.pending.remove(&(r.ip, msg.id)) else {
            return;
        };
        let answer = DnsMessage {
            id: pend.client_txid,
            flags: Flags {
                qr: true,
                rd: true,
                ra: true,
                rcode: msg.flags.rcode,
                ..Flags::default()
            },
            question: msg.question,
            answers: msg.answers,
        };
        self.emit(Packet {
            src: r.ip,
            dst: pend.client,
            sport: DNS_PORT,
            dport: pend.client_port,
            payload: answer.encode(),
            origin: net,
            relayed: false,
        });
    }

    fn run_until(&mut self, t: Timestamp) {
        while let Some(Reverse(ev)) = self.queue.peek() {
            if ev.at > t {
                break;
            }
            let Reverse(ev) = self.queue.pop().expect("peeked");
            self.clock = self.clock.max(ev.at);
            self.deliver(ev.pkt);
        }
        self.clock = self.clock.max(t);
    }
}

impl Transport for SimNet {
    fn send(&mut self, packet: &[u8], _dst: Ip4) -> Result<(), TransportError> {
        self.stats.injected += 1;
        let Ok(raw) = RawPacket::parse(packet) else {
            self.stats.malformed_injections += 1;
            return Ok(());
        };
        let origin = self.scanner_idx;
        self.emit(Packet {
            src: raw.src,
            dst: raw.dst,
            sport: raw.src_port,
            dport: raw.dst_port,
            payload: raw.payload,
            origin,
            relayed: false,
        });
        Ok(())
    }

    fn recv(&mut self) -> Result<Option<Datagram>, TransportError> {
        let now = self.clock;
        self.run_until(now);
        Ok(self.inbox.pop_front())
    }

    fn now(&self) -> Timestamp {
        self.clock
    }

    fn wait_until(&mut self, t: Timestamp) -> Result<(), TransportError> {
        self.run_until(t);
        Ok(())
    }
}
