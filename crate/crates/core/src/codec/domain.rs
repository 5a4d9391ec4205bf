//! Scan-domain encoding: `<nonce>.<hex target>.<scan id>.<zone>`.
//!
//! The nonce defeats caching; the hex label names the host the query was
//! sent to, so the original target survives forwarding; the scan id tells
//! spoofed (`s<seq>`) from unspoofed (`n<seq>`) probes.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::net::Ip4;

use super::dns::DnsName;
use super::CodecError;

pub const NONCE_LEN: usize = 6;

const ALNUM: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Spoofed,
    Unspoofed,
}

/// Scan identifier label, rendered `s<seq>` or `n<seq>`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScanId {
    pub direction: Direction,
    pub seq: u16,
}

impl ScanId {
    pub const fn spoofed(seq: u16) -> Self {
        ScanId {
            direction: Direction::Spoofed,
            seq,
        }
    }

    pub const fn unspoofed(seq: u16) -> Self {
        ScanId {
            direction: Direction::Unspoofed,
            seq,
        }
    }

    pub fn is_spoofed(self) -> bool {
        self.direction == Direction::Spoofed
    }

    /// The same sequence with the other direction.
    pub fn twin(self) -> Self {
        let direction = match self.direction {
            Direction::Spoofed => Direction::Unspoofed,
            Direction::Unspoofed => Direction::Spoofed,
        };
        ScanId { direction, ..self }
    }
}

impl fmt::Display for ScanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.direction {
            Direction::Spoofed => 's',
            Direction::Unspoofed => 'n',
        };
        write!(f, "{tag}{}", self.seq)
    }
}

impl fmt::Debug for ScanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ScanId {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodecError::BadScanId(s.to_string());
        let mut chars = s.chars();
        let direction = match chars.next().map(|c| c.to_ascii_lowercase()) {
            Some('s') => Direction::Spoofed,
            Some('n') => Direction::Unspoofed,
            _ => return Err(bad()),
        };
        let digits = chars.as_str();
        // canonical form only: no sign, no leading zeros
        if digits.is_empty()
            || !digits.bytes().all(|b| b.is_ascii_digit())
            || (digits.len() > 1 && digits.starts_with('0'))
        {
            return Err(bad());
        }
        let seq = digits.parse().map_err(|_| bad())?;
        Ok(ScanId { direction, seq })
    }
}

/// Six alphanumeric characters. Equality ignores ASCII case, matching DNS
/// name semantics (resolvers may randomize case).
#[derive(Clone, Copy)]
pub struct Nonce([u8; NONCE_LEN]);

impl Nonce {
    pub fn new(s: &str) -> Result<Self, CodecError> {
        let b = s.as_bytes();
        if b.len() != NONCE_LEN || !b.iter().all(u8::is_ascii_alphanumeric) {
            return Err(CodecError::BadNonce(s.to_string()));
        }
        let mut n = [0u8; NONCE_LEN];
        n.copy_from_slice(b);
        Ok(Nonce(n))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut n = [0u8; NONCE_LEN];
        for c in &mut n {
            *c = ALNUM[rng.random_range(0..ALNUM.len())];
        }
        Nonce(n)
    }

    pub fn as_str(&self) -> &str {
        // only ASCII alphanumerics are ever stored
        std::str::from_utf8(&self.0).expect("nonce is ASCII")
    }
}

impl PartialEq for Nonce {
    fn eq(&self, other: &Self) -> bool {
        self.0.eq_ignore_ascii_case(&other.0)
    }
}

impl Eq for Nonce {}

impl Hash for Nonce {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_ascii_lowercase().hash(state)
    }
}

impl fmt::Display for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce({})", self.as_str())
    }
}

/// A fully-qualified probe name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeDomain {
    pub nonce: Nonce,
    pub target: Ip4,
    pub scan: ScanId,
    pub zone: DnsName,
}

impl ProbeDomain {
    pub fn to_name(&self) -> DnsName {
        // lengths were checked when the domain was built
        DnsName::from_labels(self.labels()).expect("validated probe domain")
    }

    fn labels(&self) -> Vec<Vec<u8>> {
        let mut v = vec![
            self.nonce.as_str().as_bytes().to_vec(),
            format!("{:08x}", self.target.0).into_bytes(),
            self.scan.to_string().into_bytes(),
        ];
        v.extend(self.zone.labels().iter().cloned());
        v
    }
}

impl fmt::Display for ProbeDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{:08x}.{}.{}",
            self.nonce, self.target.0, self.scan, self.zone
        )
    }
}

/// Builds the probe name for `target`. Fails if the zone leaves no room for
/// the three probe labels.
pub fn encode_domain(
    nonce: Nonce,
    target: Ip4,
    scan: ScanId,
    zone: &DnsName,
) -> Result<ProbeDomain, CodecError> {
    if zone.is_root() {
        return Err(CodecError::BadName("empty zone".into()));
    }
    let d = ProbeDomain {
        nonce,
        target,
        scan,
        zone: zone.clone(),
    };
    DnsName::from_labels(d.labels())?;
    Ok(d)
}

/// Why a name did not decode as a probe name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reject {
    ForeignZone,
    WrongShape,
    BadNonce,
    BadHex,
    BadScanId,
}

impl fmt::Display for Reject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Reject::ForeignZone => "foreign zone",
            Reject::WrongShape => "wrong label count",
            Reject::BadNonce => "bad nonce",
            Reject::BadHex => "bad hex target",
            Reject::BadScanId => "bad scan id",
        };
        f.write_str(s)
    }
}

/// Fields recovered from a probe name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decoded {
    pub nonce: Nonce,
    pub target: Ip4,
    pub scan: ScanId,
}

/// Inverse of [`encode_domain`]; case-insensitive.
pub fn decode_domain(name: &DnsName, zone: &DnsName) -> Result<Decoded, Reject> {
    let head = name.strip_zone(zone).ok_or(Reject::ForeignZone)?;
    let [nonce, hex, scan] = head else {
        return Err(Reject::WrongShape);
    };
    let nonce = std::str::from_utf8(nonce)
        .ok()
        .and_then(|s| Nonce::new(s).ok())
        .ok_or(Reject::BadNonce)?;
    if hex.len() != 8 || !hex.iter().all(u8::is_ascii_hexdigit) {
        return Err(Reject::BadHex);
    }
    let hex = std::str::from_utf8(hex).map_err(|_| Reject::BadHex)?;
    let target = u32::from_str_radix(hex, 16).map_err(|_| Reject::BadHex)?;
    let scan = std::str::from_utf8(scan)
        .ok()
        .and_then(|s| s.parse::<ScanId>().ok())
        .ok_or(Reject::BadScanId)?;
    Ok(Decoded {
        nonce,
        target: Ip4(target),
        scan,
    })
}

/// Convenience over [`decode_domain`] for presentation-form names.
pub fn decode_domain_str(name: &str, zone: &DnsName) -> Result<Decoded, Reject> {
    let name: DnsName = name.parse().map_err(|_| Reject::WrongShape)?;
    decode_domain(&name, zone)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zone() -> DnsName {
        "drakkardns.com".parse().unwrap()
    }

    #[test]
    fn worked_example() {
        let d = encode_domain(
            Nonce::new("qGPDBe").unwrap(),
            "2.174.82.199".parse().unwrap(),
            ScanId::spoofed(1),
            &zone(),
        )
        .unwrap();
        assert_eq!(d.to_string(), "qGPDBe.02ae52c7.s1.drakkardns.com");
        assert_eq!(d.to_name().to_string(), d.to_string());
    }

    #[test]
    fn zero_address() {
        let d = encode_domain(
            Nonce::new("AAAAAA").unwrap(),
            Ip4(0),
            ScanId::unspoofed(1),
            &"example.org".parse().unwrap(),
        )
        .unwrap();
        assert_eq!(d.to_string(), "AAAAAA.00000000.n1.example.org");
    }

    #[test]
    fn decodes_example() {
        let got = decode_domain_str("qGPDBe.02ae52c7.s1.drakkardns.com", &zone()).unwrap();
        assert_eq!(got.nonce.as_str(), "qGPDBe");
        assert_eq!(got.target, "2.174.82.199".parse().unwrap());
        assert_eq!(got.scan, ScanId::spoofed(1));
    }

    #[test]
    fn case_insensitive_decode() {
        let a = decode_domain_str("qGPDBe.02ae52c7.s1.drakkardns.com", &zone()).unwrap();
        let b = decode_domain_str("QgPdBe.02AE52C7.S1.DrakkarDNS.COM", &zone()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects() {
        let z = zone();
        assert_eq!(
            decode_domain_str("www.drakkardns.com", &z),
            Err(Reject::WrongShape)
        );
        assert_eq!(
            decode_domain_str("qGPDBe.02ae52c7.s1.example.com", &z),
            Err(Reject::ForeignZone)
        );
        assert_eq!(
            decode_domain_str("qGPDBe.02ae52zz.s1.drakkardns.com", &z),
            Err(Reject::BadHex)
        );
        assert_eq!(
            decode_domain_str("qGPDBe.2ae52c7.s1.drakkardns.com", &z),
            Err(Reject::BadHex)
        );
        assert_eq!(
            decode_domain_str("qGPD-e.02ae52c7.s1.drakkardns.com", &z),
            Err(Reject::BadNonce)
        );
        assert_eq!(
            decode_domain_str("qGPDBe.02ae52c7.x1.drakkardns.com", &z),
            Err(Reject::BadScanId)
        );
        assert_eq!(
            decode_domain_str("qGPDBe.02ae52c7.s01.drakkardns.com", &z),
            Err(Reject::BadScanId)
        );
        assert_eq!(
            decode_domain_str("a.qGPDBe.02ae52c7.s1.drakkardns.com", &z),
            Err(Reject::WrongShape)
        );
    }

    #[test]
    fn zone_too_long() {
        // 4 x 58-byte labels: a valid 237-byte zone, but 256 bytes with probe labels
        let label = "z".repeat(58);
        let z: DnsName = format!("{label}.{label}.{label}.{label}").parse().unwrap();
        let e = encode_domain(
            Nonce::new("abcdef").unwrap(),
            Ip4(1),
            ScanId::spoofed(1),
            &z,
        );
        assert!(matches!(e, Err(CodecError::NameTooLong(_))));
    }

    #[test]
    fn scan_id_text() {
        assert_eq!("s1".parse::<ScanId>().unwrap(), ScanId::spoofed(1));
        assert_eq!("N12".parse::<ScanId>().unwrap(), ScanId::unspoofed(12));
        assert_eq!(ScanId::spoofed(3).twin(), ScanId::unspoofed(3));
        for bad in ["", "s", "x1", "s-1", "s70000", "s1a"] {
            assert!(bad.parse::<ScanId>().is_err(), "{bad}");
        }
    }

    #[test]
    fn nonce_validation() {
        assert!(Nonce::new("abc").is_err());
        assert!(Nonce::new("abcdefg").is_err());
        assert!(Nonce::new("ab de1").is_err());
        assert_eq!(Nonce::new("AbCdEf").unwrap(), Nonce::new("aBcDeF").unwrap());
    }
}
