use std::io;
use std::net::{Ipv4Addr, SocketAddrV4, UdpSocket};
use std::time::Duration;

use socket2::{Domain, Protocol, SockAddr, Socket, Type};
use thiserror::Error;

use crate::net::Ip4;
use crate::time::Timestamp;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("transport I/O: {0}")]
    Io(#[from] io::Error),
    #[error("transport closed")]
    Closed,
}

/// A UDP datagram delivered to the scanner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub src: Ip4,
    pub sport: u16,
    pub payload: Vec<u8>,
    pub ts: Timestamp,
}

/// Packet I/O used by the scan engine. Sends take complete IPv4 datagrams
/// (the source address may be forged); receives yield UDP payloads addressed
/// to the scanner.
pub trait Transport {
    fn send(&mut self, packet: &[u8], dst: Ip4) -> Result<(), TransportError>;

    /// Next pending datagram, without blocking.
    fn recv(&mut self) -> Result<Option<Datagram>, TransportError>;

    fn now(&self) -> Timestamp;

    /// Blocks (or advances a virtual clock) until `t`.
    fn wait_until(&mut self, t: Timestamp) -> Result<(), TransportError>;
}

/// Raw-socket transport. Needs CAP_NET_RAW.
pub struct RawTransport {
    raw: Socket,
    udp: UdpSocket,
}

impl RawTransport {
    /// Opens the raw sender and binds the response listener on `port`.
    pub fn open(bind: Ip4, port: u16) -> io::Result<Self> {
        // IPPROTO_RAW implies IP_HDRINCL
        let raw = Socket::new(Domain::IPV4, Type::RAW, Some(Protocol::from(255)))?;
        let udp = UdpSocket::bind(SocketAddrV4::new(Ipv4Addr::from(bind.0), port))?;
        udp.set_nonblocking(true)?;
        Ok(RawTransport { raw, udp })
    }
}

impl Transport for RawTransport {
    fn send(&mut self, packet: &[u8], dst: Ip4) -> Result<(), TransportError> {
        let addr = SockAddr::from(SocketAddrV4::new(Ipv4Addr::from(dst.0), 0));
        self.raw.send_to(packet, &addr)?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Option<Datagram>, TransportError> {
        let mut buf = [0u8; 4096];
        match self.udp.recv_from(&mut buf) {
            Ok((n, std::net::SocketAddr::V4(from))) => Ok(Some(Datagram {
                src: Ip4(u32::from(*from.ip())),
                sport: from.port(),
                payload: buf[..n].to_vec(),
                ts: Timestamp::now(),
            })),
            Ok(_) => Ok(None),
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn now(&self) -> Timestamp {
        Timestamp::now()
    }

    fn wait_until(&mut self, t: Timestamp) -> Result<(), TransportError> {
        let now = Timestamp::now();
        if t > now {
            std::thread::sleep(t - now);
        }
        Ok(())
    }
}

/// Transport that only records what it is asked to send. Used for dry runs
/// and tests.
#[derive(Debug, Default)]
pub struct RecordingTransport {
    pub sent: Vec<(Ip4, Vec<u8>)>,
    pub clock: Timestamp,
    pub fail_after: Option<usize>,
}

impl Transport for RecordingTransport {
    fn send(&mut self, packet: &[u8], dst: Ip4) -> Result<(), TransportError> {
        if self.fail_after.is_some_and(|n| self.sent.len() >= n) {
            return Err(TransportError::Closed);
        }
        self.sent.push((dst, packet.to_vec()));
        Ok(())
    }

    fn recv(&mut self) -> Result<Option<Datagram>, TransportError> {
        Ok(None)
    }

    fn now(&self) -> Timestamp {
        self.clock
    }

    fn wait_until(&mut self, t: Timestamp) -> Result<(), TransportError> {
        self.clock = self.clock.max(t);
        Ok(())
    }
}

pub(crate) const POLL_STEP: Duration = Duration::from_millis(100);
