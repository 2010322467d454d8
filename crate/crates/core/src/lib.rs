//! Core models for running a carbon-aware IMAP caching proxy fleet:
//! the money side (renewable-energy certificates plus instance rental),
//! the miss-rate side (how caching reduces upstream load as instances
//! are added), the cache itself, and a trace-driven workload simulator.

pub mod cache;
pub mod carbon;
pub mod cost;
pub mod missrate;
pub mod optimizer;
pub mod units;
pub mod workload;
