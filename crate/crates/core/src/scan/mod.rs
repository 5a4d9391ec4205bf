//! Probe transmission and scanner-side response handling.

mod engine;
mod transport;

pub use engine::{run_scan, ScanAbort, ScanConfig, ScanRunReport};
pub use transport::{Datagram, RawTransport, RecordingTransport, Transport, TransportError};

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::codec::{decode_domain_str, DnsName, Rcode};
use crate::net::{AsnMap, Ip4};
use crate::time::Timestamp;

/// A response that reached the scanner. `queried` comes from the echoed
/// domain, never from the responder address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanResponse {
    pub queried: Ip4,
    pub responder: Ip4,
    pub rcode: Rcode,
    pub domain: String,
    pub ts: Timestamp,
}

pub trait ResponseSink {
    fn record(&mut self, r: &ScanResponse) -> io::Result<()>;
}

impl ResponseSink for Vec<ScanResponse> {
    fn record(&mut self, r: &ScanResponse) -> io::Result<()> {
        self.push(r.clone());
        Ok(())
    }
}

/// Appends one JSON object per line.
pub struct JsonlSink<W: Write> {
    out: W,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        JsonlSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> ResponseSink for JsonlSink<W> {
    fn record(&mut self, r: &ScanResponse) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, r)?;
        self.out.write_all(b"\n")
    }
}

/// Reads a JSONL response sink. Unparseable lines (such as a torn final
/// line after a crash) are skipped and counted.
pub fn read_responses<R: BufRead>(input: R) -> io::Result<(Vec<ScanResponse>, usize)> {
    let mut out = Vec::new();
    let mut bad = 0;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => out.push(r),
            Err(_) => bad += 1,
        }
    }
    Ok((out, bad))
}

/// Open resolvers: hosts that answered NOERROR from their own address for a
/// domain encoding themselves.
pub fn detect_open(responses: &[ScanResponse], zone: &DnsName) -> BTreeSet<Ip4> {
    responses
        .iter()
        .filter(|r| r.rcode == Rcode::NoError && r.responder == r.queried)
        .filter(|r| decode_domain_str(&r.domain, zone).is_ok_and(|d| d.target == r.queried))
        .map(|r| r.queried)
        .collect()
}

/// Forwarders whose answers came back from another address.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ForwarderFindings {
    /// `(forwarder, responder)` pairs where forwarder, responder and scanner
    /// sit in three different ASes.
    pub misbehaving: BTreeSet<(Ip4, Ip4)>,
    /// Responses from private (RFC 1918) sources, a sign of broken NAT.
    pub nat: BTreeSet<(Ip4, Ip4)>,
    pub same_as: BTreeSet<(Ip4, Ip4)>,
    pub unknown_as: BTreeSet<(Ip4, Ip4)>,
}

pub fn detect_misbehaving_forwarders(
    responses: &[ScanResponse],
    asn: &AsnMap,
    scanner_ip: Ip4,
) -> ForwarderFindings {
    let mut f = ForwarderFindings::default();
    let scanner_as = asn.asn_of(scanner_ip);
    for r in responses.iter().filter(|r| r.responder != r.queried) {
        let key = (r.queried, r.responder);
        if r.responder.is_private() {
            f.nat.insert(key);
            continue;
        }
        let (Some(a), Some(b), Some(c)) =
            (asn.asn_of(r.queried), asn.asn_of(r.responder), scanner_as)
        else {
            f.unknown_as.insert(key);
            continue;
        };
        if a != b && b != c && a != c {
            f.misbehaving.insert(key);
        } else {
            f.same_as.insert(key);
        }
    }
    f
}
