//! Caching IMAP proxy: protocol handling, the traffic ledger, live
//! sessions against a real or mock upstream, and the configuration the
//! `greenproxy` binary consumes.

pub mod config;
pub mod imap;
pub mod ledger;
pub mod mock;
pub mod netutil;
pub mod session;
