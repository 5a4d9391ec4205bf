//! Probe construction and parsing: scan-domain encoding, DNS messages and
//! raw IPv4/UDP datagrams.

pub mod dns;
mod domain;
mod packet;

pub use dns::{DnsMessage, DnsName, Flags, Question, RData, Rcode, ResourceRecord};
pub use domain::{
    decode_domain, decode_domain_str, encode_domain, Decoded, Direction, Nonce, ProbeDomain,
    Reject, ScanId, NONCE_LEN,
};
pub use packet::{
    build_raw, internet_checksum, udp_checksum, RawPacket, DNS_PORT, IPV4_HEADER_LEN,
    MAX_DNS_PAYLOAD, UDP_HEADER_LEN,
};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::net::Ip4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("message truncated")]
    Truncated,
    #[error("empty label")]
    EmptyLabel,
    #[error("label of {0} bytes exceeds 63")]
    LabelTooLong(usize),
    #[error("name of {0} wire bytes exceeds 255")]
    NameTooLong(usize),
    #[error("invalid name {0:?}")]
    BadName(String),
    #[error("invalid nonce {0:?}")]
    BadNonce(String),
    #[error("invalid scan id {0:?}")]
    BadScanId(String),
    #[error("compression pointer loop")]
    PointerLoop,
    #[error("unsupported label type {0:#04x}")]
    BadLabelType(u8),
    #[error("expected exactly one question, found {0}")]
    QuestionCount(u16),
    #[error("rdata length mismatch")]
    RdataLength,
    #[error("empty payload")]
    EmptyPayload,
    #[error("payload of {0} bytes exceeds 512")]
    PayloadTooLarge(usize),
    #[error("not an IPv4 packet")]
    NotIpv4,
    #[error("not UDP (protocol {0})")]
    NotUdp(u8),
    #[error("bad checksum")]
    BadChecksum,
    #[error("not a response")]
    NotResponse,
}

/// A-record query for a probe name: recursion desired, one question.
pub fn build_query(domain: &ProbeDomain, txid: u16) -> DnsMessage {
    DnsMessage {
        id: txid,
        flags: Flags {
            rd: true,
            ..Flags::default()
        },
        question: Question {
            name: domain.to_name(),
            qtype: dns::TYPE_A,
            qclass: dns::CLASS_IN,
        },
        answers: Vec::new(),
    }
}

/// Secret used to derive transaction ids, so a response can be checked
/// against its probe without per-query state.
#[derive(Clone, PartialEq, Eq)]
pub struct TxidKey([u8; 16]);

impl TxidKey {
    pub fn new(bytes: [u8; 16]) -> Self {
        TxidKey(bytes)
    }

    pub fn from_seed(seed: u64) -> Self {
        let d = Sha256::digest(seed.to_be_bytes());
        let mut k = [0u8; 16];
        k.copy_from_slice(&d[..16]);
        TxidKey(k)
    }

    /// Transaction id for a probe to `target` under `scan`.
    pub fn txid(&self, target: Ip4, scan: ScanId) -> u16 {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update(target.octets());
        h.update([matches!(scan.direction, Direction::Spoofed) as u8]);
        h.update(scan.seq.to_be_bytes());
        let d = h.finalize();
        u16::from_be_bytes([d[0], d[1]])
    }
}

impl std::fmt::Debug for TxidKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TxidKey(..)")
    }
}

/// What the scanner needs from a response datagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseInfo {
    pub responder: Ip4,
    pub txid: u16,
    pub rcode: Rcode,
    pub qname: DnsName,
}

/// Parses a DNS response carried in a raw IPv4/UDP datagram. Only the
/// header and question are required; trailing bytes may be malformed.
pub fn parse_response(bytes: &[u8]) -> Result<ResponseInfo, CodecError> {
    let pkt = RawPacket::parse(bytes)?;
    parse_dns_response(pkt.src, &pkt.payload)
}

/// Like [`parse_response`] for a bare DNS payload received from `responder`.
pub fn parse_dns_response(responder: Ip4, payload: &[u8]) -> Result<ResponseInfo, CodecError> {
    let head = dns::decode_head(payload)?;
    if !head.flags.qr {
        return Err(CodecError::NotResponse);
    }
    Ok(ResponseInfo {
        responder,
        txid: head.id,
        rcode: head.flags.rcode(),
        qname: head.question.name,
    })
}
