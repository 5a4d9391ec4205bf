//! IPv4 address and prefix model, routing tables, and ASN/geo lookups.

mod asn;
mod geo;
mod lpm;
mod table;

pub use asn::{Asn, AsnMap};
pub use geo::{Country, GeoMap, MajorityCountry};
pub use lpm::PrefixMap;
pub use table::{parse_prefix_lines, RoutingTable};

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised while reading address data.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("invalid IPv4 address {0:?}")]
    BadAddress(String),
    #[error("invalid prefix {0:?}")]
    BadPrefix(String),
    #[error("prefix {0} has host bits set")]
    HostBitsSet(String),
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("geo ranges overlap: {0} and {1}")]
    OverlappingRanges(String, String),
}

/// An IPv4 address stored as its 32-bit big-endian integer value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Ip4(pub u32);

impl Ip4 {
    pub const fn new(a: u8, b: u8, c: u8, d: u8) -> Self {
        Ip4(u32::from_be_bytes([a, b, c, d]))
    }

    pub const fn octets(self) -> [u8; 4] {
        self.0.to_be_bytes()
    }

    pub fn checked_add(self, n: u32) -> Option<Ip4> {
        self.0.checked_add(n).map(Ip4)
    }

    pub fn checked_sub(self, n: u32) -> Option<Ip4> {
        self.0.checked_sub(n).map(Ip4)
    }

    /// RFC 1918 private space.
    pub fn is_private(self) -> bool {
        let [a, b, ..] = self.octets();
        a == 10 || (a == 172 && (16..32).contains(&b)) || (a == 192 && b == 168)
    }
}

impl fmt::Display for Ip4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.octets();
        write!(f, "{a}.{b}.{c}.{d}")
    }
}

impl fmt::Debug for Ip4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Ip4 {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<Ipv4Addr>()
            .map(Ip4::from)
            .map_err(|_| NetError::BadAddress(s.to_string()))
    }
}

impl From<Ipv4Addr> for Ip4 {
    fn from(a: Ipv4Addr) -> Self {
        Ip4(u32::from(a))
    }
}

impl From<Ip4> for Ipv4Addr {
    fn from(a: Ip4) -> Self {
        Ipv4Addr::from(a.0)
    }
}

impl Serialize for Ip4 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ip4 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A CIDR block. The base never has host bits set.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    base: Ip4,
    len: u8,
}

const fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - len as u32)
    }
}

impl Prefix {
    /// Builds a prefix, rejecting bases with host bits set.
    pub fn new(base: Ip4, len: u8) -> Result<Self, NetError> {
        if len > 32 {
            return Err(NetError::BadPrefix(format!("{base}/{len}")));
        }
        if base.0 & !mask(len) != 0 {
            return Err(NetError::HostBitsSet(format!("{base}/{len}")));
        }
        Ok(Prefix { base, len })
    }

    /// Builds a prefix by clearing host bits of `ip`.
    pub fn truncating(ip: Ip4, len: u8) -> Self {
        let len = len.min(32);
        Prefix {
            base: Ip4(ip.0 & mask(len)),
            len,
        }
    }

    pub fn base(self) -> Ip4 {
        self.base
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> u8 {
        self.len
    }

    pub fn mask(self) -> u32 {
        mask(self.len)
    }

    /// Last address of the block.
    pub fn last(self) -> Ip4 {
        Ip4(self.base.0 | !mask(self.len))
    }

    /// Number of addresses in the block.
    pub fn size(self) -> u64 {
        1u64 << (32 - self.len as u32)
    }

    pub fn contains(self, ip: Ip4) -> bool {
        ip.0 & mask(self.len) == self.base.0
    }

    /// True when `other` lies entirely inside `self` (including equality).
    pub fn covers(self, other: Prefix) -> bool {
        self.len <= other.len && self.contains(other.base)
    }

    /// True when the address is probed by the scanner: network and broadcast
    /// addresses are skipped per /24 for blocks of /24 or larger, per block for
    /// /25 to /30, and /31 and /32 are used in full.
    pub fn is_usable_host(self, ip: Ip4) -> bool {
        if !self.contains(ip) {
            return false;
        }
        match self.len {
            0..=24 => !matches!(ip.0 & 0xff, 0 | 255),
            25..=30 => ip != self.base && ip != self.last(),
            _ => true,
        }
    }

    /// Number of usable hosts as defined by [`Prefix::is_usable_host`].
    pub fn host_count(self) -> u64 {
        match self.len {
            0..=24 => (1u64 << (24 - self.len as u32)) * 254,
            25..=30 => self.size() - 2,
            _ => self.size(),
        }
    }
}

/// The /24 block containing `ip`.
pub fn to_slash24(ip: Ip4) -> Prefix {
    Prefix::truncating(ip, 24)
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base, self.len)
    }
}

impl fmt::Debug for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Prefix {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| NetError::BadPrefix(s.to_string()))?;
        let base: Ip4 = addr
            .parse()
            .map_err(|_| NetError::BadPrefix(s.to_string()))?;
        let len: u8 = len
            .parse()
            .map_err(|_| NetError::BadPrefix(s.to_string()))?;
        Prefix::new(base, len)
    }
}

impl Serialize for Prefix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prefix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
