//! Remote inference of inbound source address validation (SAV).
//!
//! A scanner sends each host of a routed prefix one DNS query whose source is
//! forged to a neighbouring address of the same network, followed by the same
//! query from the scanner's real address. Resolution attempts reaching the
//! authoritative server for the scan zone reveal networks that let spoofed
//! packets in; open resolvers that answer only the genuine query reveal
//! networks (or transit paths) that filter them.

pub mod codec;
pub mod collector;
pub mod inference;
pub mod net;
pub mod plan;
pub mod report;
pub mod scan;
pub mod sim;
pub mod time;
