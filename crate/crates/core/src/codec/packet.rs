//! Raw IPv4/UDP datagrams with arbitrary (spoofable) source addresses.

use crate::net::Ip4;

use super::CodecError;

pub const IPV4_HEADER_LEN: usize = 20;
pub const UDP_HEADER_LEN: usize = 8;
pub const PROTO_UDP: u8 = 17;
pub const DNS_PORT: u16 = 53;
/// Largest DNS payload emitted; probes never need EDNS-sized messages.
pub const MAX_DNS_PAYLOAD: usize = 512;

const DEFAULT_TTL: u8 = 64;
const FLAG_DONT_FRAGMENT: u16 = 0x4000;

/// A UDP datagram with its IPv4 addressing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPacket {
    pub src: Ip4,
    pub dst: Ip4,
    pub src_port: u16,
    pub dst_port: u16,
    pub payload: Vec<u8>,
}

/// One's-complement sum of `data` folded into 16 bits, continuing from
/// `initial`.
fn ones_complement_sum(data: &[u8], initial: u32) -> u16 {
    let mut sum = initial;
    let mut chunks = data.chunks_exact(2);
    for c in &mut chunks {
        sum = sum.wrapping_add(u16::from_be_bytes([c[0], c[1]]) as u32);
        sum = (sum & 0xffff) + (sum >> 16);
    }
    if let [last] = chunks.remainder() {
        sum = sum.wrapping_add((*last as u32) << 8);
        sum = (sum & 0xffff) + (sum >> 16);
    }
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    sum as u16
}

/// Internet checksum (RFC 1071) of `data`.
pub fn internet_checksum(data: &[u8]) -> u16 {
    !ones_complement_sum(data, 0)
}

fn pseudo_header_sum(src: Ip4, dst: Ip4, udp_len: u16) -> u32 {
    let mut ph = [0u8; 12];
    ph[0..4].copy_from_slice(&src.octets());
    ph[4..8].copy_from_slice(&dst.octets());
    ph[9] = PROTO_UDP;
    ph[10..12].copy_from_slice(&udp_len.to_be_bytes());
    ones_complement_sum(&ph, 0) as u32
}

/// UDP checksum over pseudo-header, UDP header and payload. A computed zero
/// is transmitted as `0xffff`.
pub fn udp_checksum(src: Ip4, dst: Ip4, udp: &[u8]) -> u16 {
    let c = !ones_complement_sum(udp, pseudo_header_sum(src, dst, udp.len() as u16));
    if c == 0 {
        0xffff
    } else {
        c
    }
}

impl RawPacket {
    /// Serializes to an IPv4 datagram with valid header and UDP checksums.
    pub fn to_bytes(&self) -> Result<Vec<u8>, CodecError> {
        if self.payload.is_empty() {
            return Err(CodecError::EmptyPayload);
        }
        if self.payload.len() > MAX_DNS_PAYLOAD {
            return Err(CodecError::PayloadTooLarge(self.payload.len()));
        }
        let udp_len = (UDP_HEADER_LEN + self.payload.len()) as u16;
        let total = IPV4_HEADER_LEN as u16 + udp_len;
        let mut b = Vec::with_capacity(total as usize);
        b.push(0x45);
        b.push(0);
        b.extend_from_slice(&total.to_be_bytes());
        // identification: low bits of the payload's leading bytes (DNS id)
        let ident = u16::from_be_bytes([self.payload[0], *self.payload.get(1).unwrap_or(&0)]);
        b.extend_from_slice(&ident.to_be_bytes());
        b.extend_from_slice(&FLAG_DONT_FRAGMENT.to_be_bytes());
        b.push(DEFAULT_TTL);
        b.push(PROTO_UDP);
        b.extend_from_slice(&[0, 0]);
        b.extend_from_slice(&self.src.octets());
        b.extend_from_slice(&self.dst.octets());
        let hc = internet_checksum(&b[..IPV4_HEADER_LEN]);
        b[10..12].copy_from_slice(&hc.to_be_bytes());

        b.extend_from_slice(&self.src_port.to_be_bytes());
        b.extend_from_slice(&self.dst_port.to_be_bytes());
        b.extend_from_slice(&udp_len.to_be_bytes());
        b.extend_from_slice(&[0, 0]);
        b.extend_from_slice(&self.payload);
        let uc = udp_checksum(self.src, self.dst, &b[IPV4_HEADER_LEN..]);
        b[IPV4_HEADER_LEN + 6..IPV4_HEADER_LEN + 8].copy_from_slice(&uc.to_be_bytes());
        Ok(b)
    }

    /// Parses an IPv4/UDP datagram, verifying both checksums (a zero UDP
    /// checksum means "not computed" and is accepted).
    pub fn parse(buf: &[u8]) -> Result<RawPacket, CodecError> {
        if buf.len() < IPV4_HEADER_LEN {
            return Err(CodecError::Truncated);
        }
        if buf[0] >> 4 != 4 {
            return Err(CodecError::NotIpv4);
        }
        let ihl = ((buf[0] & 0x0f) as usize) * 4;
        if ihl < IPV4_HEADER_LEN || buf.len() < ihl {
            return Err(CodecError::Truncated);
        }
        let total = u16::from_be_bytes([buf[2], buf[3]]) as usize;
        if total < ihl + UDP_HEADER_LEN || total > buf.len() {
            return Err(CodecError::Truncated);
        }
        if buf[9] != PROTO_UDP {
            return Err(CodecError::NotUdp(buf[9]));
        }
        if internet_checksum(&buf[..ihl]) != 0 {
            return Err(CodecError::BadChecksum);
        }
        let src = Ip4(u32::from_be_bytes([buf[12], buf[13], buf[14], buf[15]]));
        let dst = Ip4(u32::from_be_bytes([buf[16], buf[17], buf[18], buf[19]]));
        let udp = &buf[ihl..total];
        let udp_len = u16::from_be_bytes([udp[4], udp[5]]) as usize;
        if udp_len < UDP_HEADER_LEN || udp_len > udp.len() {
            return Err(CodecError::Truncated);
        }
        let udp = &udp[..udp_len];
        let stored = u16::from_be_bytes([udp[6], udp[7]]);
        if stored != 0
            && ones_complement_sum(udp, pseudo_header_sum(src, dst, udp_len as u16)) != 0xffff
        {
            return Err(CodecError::BadChecksum);
        }
        Ok(RawPacket {
            src,
            dst,
            src_port: u16::from_be_bytes([udp[0], udp[1]]),
            dst_port: u16::from_be_bytes([udp[2], udp[3]]),
            payload: udp[UDP_HEADER_LEN..].to_vec(),
        })
    }
}

/// Builds an IPv4/UDP datagram carrying `dns`; `src` may be any address.
pub fn build_raw(
    src: Ip4,
    dst: Ip4,
    src_port: u16,
    dst_port: u16,
    dns: &[u8],
) -> Result<Vec<u8>, CodecError> {
    RawPacket {
        src,
        dst,
        src_port,
        dst_port,
        payload: dns.to_vec(),
    }
    .to_bytes()
}
