//! DNS message encoding and decoding (RFC 1035 framing).
//!
//! Names are never compressed on encode; compression pointers are followed on
//! decode with a hop limit.

use std::fmt;
use std::str::FromStr;

use crate::net::Ip4;

use super::CodecError;

pub const TYPE_A: u16 = 1;
pub const TYPE_NS: u16 = 2;
pub const TYPE_SOA: u16 = 6;
pub const CLASS_IN: u16 = 1;

const HEADER_LEN: usize = 12;
const MAX_NAME_WIRE: usize = 255;
const MAX_LABEL: usize = 63;
const MAX_POINTER_HOPS: usize = 64;

/// A domain name as a sequence of raw labels (root label implicit).
#[derive(Clone, Default)]
pub struct DnsName {
    labels: Vec<Vec<u8>>,
}

impl DnsName {
    pub fn root() -> Self {
        DnsName { labels: Vec::new() }
    }

    pub fn from_labels<I, L>(labels: I) -> Result<Self, CodecError>
    where
        I: IntoIterator<Item = L>,
        L: Into<Vec<u8>>,
    {
        let name = DnsName {
            labels: labels.into_iter().map(Into::into).collect(),
        };
        name.validate()?;
        Ok(name)
    }

    fn validate(&self) -> Result<(), CodecError> {
        for l in &self.labels {
            if l.is_empty() {
                return Err(CodecError::EmptyLabel);
            }
            if l.len() > MAX_LABEL {
                return Err(CodecError::LabelTooLong(l.len()));
            }
        }
        let wire = self.wire_len();
        if wire > MAX_NAME_WIRE {
            return Err(CodecError::NameTooLong(wire));
        }
        Ok(())
    }

    pub fn labels(&self) -> &[Vec<u8>] {
        &self.labels
    }

    /// Encoded length including the terminating root label.
    pub fn wire_len(&self) -> usize {
        self.labels.iter().map(|l| l.len() + 1).sum::<usize>() + 1
    }

    pub fn is_root(&self) -> bool {
        self.labels.is_empty()
    }

    /// ASCII case-insensitive comparison.
    pub fn eq_ignore_case(&self, other: &DnsName) -> bool {
        self.labels.len() == other.labels.len()
            && self
                .labels
                .iter()
                .zip(&other.labels)
                .all(|(a, b)| a.eq_ignore_ascii_case(b))
    }

    /// If `self` is `zone` or lies below it, the labels left of the zone.
    pub fn strip_zone(&self, zone: &DnsName) -> Option<&[Vec<u8>]> {
        let n = self.labels.len().checked_sub(zone.labels.len())?;
        let tail = &self.labels[n..];
        tail.iter()
            .zip(&zone.labels)
            .all(|(a, b)| a.eq_ignore_ascii_case(b))
            .then_some(&self.labels[..n])
    }

    pub fn is_within(&self, zone: &DnsName) -> bool {
        self.strip_zone(zone).is_some()
    }

    /// Lower-cased presentation form, used as a dedup key.
    pub fn to_lowercase_string(&self) -> String {
        self.to_string().to_ascii_lowercase()
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        for l in &self.labels {
            out.push(l.len() as u8);
            out.extend_from_slice(l);
        }
        out.push(0);
    }
}

impl PartialEq for DnsName {
    fn eq(&self, other: &Self) -> bool {
        self.eq_ignore_case(other)
    }
}

impl Eq for DnsName {}

impl fmt::Display for DnsName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.labels.is_empty() {
            return f.write_str(".");
        }
        for (i, l) in self.labels.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            for &b in l {
                match b {
                    b'.' | b'\\' => write!(f, "\\{}", b as char)?,
                    0x21..=0x7e => write!(f, "{}", b as char)?,
                    _ => write!(f, "\\{b:03}")?,
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for DnsName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DnsName({self})")
    }
}

impl FromStr for DnsName {
    type Err = CodecError;

    /// Parses presentation form; a trailing dot is optional. Escapes are not
    /// supported.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let s = s.strip_suffix('.').unwrap_or(s);
        if s.is_empty() {
            return Ok(DnsName::root());
        }
        if s.bytes().any(|b| !(0x21..=0x7e).contains(&b) || b == b'\\') {
            return Err(CodecError::BadName(s.to_string()));
        }
        DnsName::from_labels(s.split('.').map(|l| l.as_bytes().to_vec()))
    }
}

/// Response code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rcode {
    NoError,
    FormErr,
    ServFail,
    NxDomain,
    NotImp,
    Refused,
    Other(u8),
}

impl Rcode {
    pub fn from_u8(v: u8) -> Self {
        match v & 0x0f {
            0 => Rcode::NoError,
            1 => Rcode::FormErr,
            2 => Rcode::ServFail,
            3 => Rcode::NxDomain,
            4 => Rcode::NotImp,
            5 => Rcode::Refused,
            n => Rcode::Other(n),
        }
    }

    pub fn to_u8(self) -> u8 {
        match self {
            Rcode::NoError => 0,
            Rcode::FormErr => 1,
            Rcode::ServFail => 2,
            Rcode::NxDomain => 3,
            Rcode::NotImp => 4,
            Rcode::Refused => 5,
            Rcode::Other(n) => n & 0x0f,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Rcode::NoError => "NOERROR",
            Rcode::FormErr => "FORMERR",
            Rcode::ServFail => "SERVFAIL",
            Rcode::NxDomain => "NXDOMAIN",
            Rcode::NotImp => "NOTIMP",
            Rcode::Refused => "REFUSED",
            Rcode::Other(_) => "OTHER",
        }
    }
}

impl fmt::Display for Rcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rcode::Other(n) => write!(f, "RCODE{n}"),
            r => f.write_str(r.as_str()),
        }
    }
}

impl FromStr for Rcode {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "NOERROR" => Rcode::NoError,
            "FORMERR" => Rcode::FormErr,
            "SERVFAIL" => Rcode::ServFail,
            "NXDOMAIN" => Rcode::NxDomain,
            "NOTIMP" => Rcode::NotImp,
            "REFUSED" => Rcode::Refused,
            other => other
                .strip_prefix("RCODE")
                .and_then(|n| n.parse::<u8>().ok())
                .filter(|n| *n < 16)
                .map(Rcode::from_u8)
                .ok_or_else(|| CodecError::BadName(format!("unknown rcode {s:?}")))?,
        })
    }
}

impl serde::Serialize for Rcode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Rcode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Header flag fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub qr: bool,
    pub opcode: u8,
    pub aa: bool,
    pub tc: bool,
    pub rd: bool,
    pub ra: bool,
    pub rcode: u8,
}

impl Flags {
    pub fn to_u16(self) -> u16 {
        (self.qr as u16) << 15
            | ((self.opcode & 0x0f) as u16) << 11
            | (self.aa as u16) << 10
            | (self.tc as u16) << 9
            | (self.rd as u16) << 8
            | (self.ra as u16) << 7
            | (self.rcode & 0x0f) as u16
    }

    pub fn from_u16(v: u16) -> Self {
        Flags {
            qr: v & 0x8000 != 0,
            opcode: ((v >> 11) & 0x0f) as u8,
            aa: v & 0x0400 != 0,
            tc: v & 0x0200 != 0,
            rd: v & 0x0100 != 0,
            ra: v & 0x0080 != 0,
            rcode: (v & 0x0f) as u8,
        }
    }

    pub fn rcode(self) -> Rcode {
        Rcode::from_u8(self.rcode)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub name: DnsName,
    pub qtype: u16,
    pub qclass: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RData {
    A(Ip4),
    Ns(DnsName),
    Soa {
        mname: DnsName,
        rname: DnsName,
        serial: u32,
        refresh: u32,
        retry: u32,
        expire: u32,
        minimum: u32,
    },
    Other(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceRecord {
    pub name: DnsName,
    pub rtype: u16,
    pub class: u16,
    pub ttl: u32,
    pub data: RData,
}

impl ResourceRecord {
    pub fn a(name: DnsName, ttl: u32, addr: Ip4) -> Self {
        ResourceRecord {
            name,
            rtype: TYPE_A,
            class: CLASS_IN,
            ttl,
            data: RData::A(addr),
        }
    }
}

/// A DNS message with exactly one question.
///
/// Authority and additional sections are skipped on decode and never emitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnsMessage {
    pub id: u16,
    pub flags: Flags,
    pub question: Question,
    pub answers: Vec<ResourceRecord>,
}

impl DnsMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.question.name.wire_len() + 4);
        out.extend_from_slice(&self.id.to_be_bytes());
        out.extend_from_slice(&self.flags.to_u16().to_be_bytes());
        out.extend_from_slice(&1u16.to_be_bytes());
        out.extend_from_slice(&(self.answers.len() as u16).to_be_bytes());
        out.extend_from_slice(&[0, 0, 0, 0]);
        self.question.name.encode_into(&mut out);
        out.extend_from_slice(&self.question.qtype.to_be_bytes());
        out.extend_from_slice(&self.question.qclass.to_be_bytes());
        for rr in &self.answers {
            rr.name.encode_into(&mut out);
            out.extend_from_slice(&rr.rtype.to_be_bytes());
            out.extend_from_slice(&rr.class.to_be_bytes());
            out.extend_from_slice(&rr.ttl.to_be_bytes());
            let len_at = out.len();
            out.extend_from_slice(&[0, 0]);
            match &rr.data {
                RData::A(ip) => out.extend_from_slice(&ip.octets()),
                RData::Ns(n) => n.encode_into(&mut out),
                RData::Soa {
                    mname,
                    rname,
                    serial,
                    refresh,
                    retry,
                    expire,
                    minimum,
                } => {
                    mname.encode_into(&mut out);
                    rname.encode_into(&mut out);
                    for v in [serial, refresh, retry, expire, minimum] {
                        out.extend_from_slice(&v.to_be_bytes());
                    }
                }
                RData::Other(b) => out.extend_from_slice(b),
            }
            let rdlen = (out.len() - len_at - 2) as u16;
            out[len_at..len_at + 2].copy_from_slice(&rdlen.to_be_bytes());
        }
        out
    }

    /// Strict decode: header, the single question and every answer record
    /// must parse.
    pub fn decode(buf: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(buf);
        let (id, flags, qd, an) = r.header()?;
        if qd != 1 {
            return Err(CodecError::QuestionCount(qd));
        }
        let question = r.question()?;
        let mut answers = Vec::with_capacity(an.min(32) as usize);
        for _ in 0..an {
            answers.push(r.record()?);
        }
        Ok(DnsMessage {
            id,
            flags,
            question,
            answers,
        })
    }
}

/// Header and first question only; anything after the question is ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageHead {
    pub id: u16,
    pub flags: Flags,
    pub question: Question,
}

pub fn decode_head(buf: &[u8]) -> Result<MessageHead, CodecError> {
    let mut r = Reader::new(buf);
    let (id, flags, qd, _) = r.header()?;
    if qd == 0 {
        return Err(CodecError::QuestionCount(qd));
    }
    let question = r.question()?;
    Ok(MessageHead {
        id,
        flags,
        question,
    })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).ok_or(CodecError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(CodecError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn header(&mut self) -> Result<(u16, Flags, u16, u16), CodecError> {
        let id = self.u16()?;
        let flags = Flags::from_u16(self.u16()?);
        let qd = self.u16()?;
        let an = self.u16()?;
        self.take(4)?;
        Ok((id, flags, qd, an))
    }

    fn question(&mut self) -> Result<Question, CodecError> {
        let name = self.name()?;
        let qtype = self.u16()?;
        let qclass = self.u16()?;
        Ok(Question {
            name,
            qtype,
            qclass,
        })
    }

    fn name(&mut self) -> Result<DnsName, CodecError> {
        let mut labels = Vec::new();
        let mut wire = 1usize;
        let mut pos = self.pos;
        let mut resume: Option<usize> = None;
        let mut hops = 0;
        loop {
            let len = *self.buf.get(pos).ok_or(CodecError::Truncated)? as usize;
            match len & 0xc0 {
                0x00 => {
                    if len == 0 {
                        pos += 1;
                        break;
                    }
                    let label = self
                        .buf
                        .get(pos + 1..pos + 1 + len)
                        .ok_or(CodecError::Truncated)?;
                    wire += len + 1;
                    if wire > MAX_NAME_WIRE {
                        return Err(CodecError::NameTooLong(wire));
                    }
                    labels.push(label.to_vec());
                    pos += 1 + len;
                }
                0xc0 => {
                    let lo = *self.buf.get(pos + 1).ok_or(CodecError::Truncated)? as usize;
                    hops += 1;
                    if hops > MAX_POINTER_HOPS {
                        return Err(CodecError::PointerLoop);
                    }
                    if resume.is_none() {
                        resume = Some(pos + 2);
                    }
                    pos = ((len & 0x3f) << 8) | lo;
                }
                _ => return Err(CodecError::BadLabelType(len as u8)),
            }
        }
        self.pos = resume.unwrap_or(pos);
        Ok(DnsName { labels })
    }

    fn record(&mut self) -> Result<ResourceRecord, CodecError> {
        let name = self.name()?;
        let rtype = self.u16()?;
        let class = self.u16()?;
        let ttl = self.u32()?;
        let rdlen = self.u16()? as usize;
        let start = self.pos;
        let end = start.checked_add(rdlen).ok_or(CodecError::Truncated)?;
        if end > self.buf.len() {
            return Err(CodecError::Truncated);
        }
        let data = match rtype {
            TYPE_A if rdlen == 4 => {
                let b = self.take(4)?;
                RData::A(Ip4(u32::from_be_bytes([b[0], b[1], b[2], b[3]])))
            }
            TYPE_NS => RData::Ns(self.name()?),
            TYPE_SOA => RData::Soa {
                mname: self.name()?,
                rname: self.name()?,
                serial: self.u32()?,
                refresh: self.u32()?,
                retry: self.u32()?,
                expire: self.u32()?,
                minimum: self.u32()?,
            },
            _ => RData::Other(self.take(rdlen)?.to_vec()),
        };
        if self.pos != end {
            return Err(CodecError::RdataLength);
        }
        Ok(ResourceRecord {
            name,
            rtype,
            class,
            ttl,
            data,
        })
    }
}
