//! Sharded in-memory cache for fetched message payloads: byte-budget LRU
//! nodes behind a consistent-hash ring.

mod lru;
mod ring;
mod tier;

pub use lru::CacheNode;
pub use ring::{HashKind, HashRing, RemapReport, RingChange, DEFAULT_VIRTUAL_POINTS};
pub use tier::{CacheTier, NodeConfig};

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CacheError {
    #[error("ring has no nodes")]
    EmptyRing,
    #[error("payload of {payload_bytes} bytes exceeds node capacity {capacity_bytes}")]
    PayloadTooLarge { payload_bytes: u64, capacity_bytes: u64 },
    #[error("node `{0}` is already on the ring")]
    DuplicateNode(String),
    #[error("node `{0}` is not on the ring")]
    UnknownNode(String),
    #[error("cannot remove the only node")]
    LastNode,
    #[error("virtual point count must be at least 1")]
    ZeroVirtualPoints,
    #[error("node capacity must be at least 1 byte")]
    ZeroCapacity,
}

/// Identifies one cached message section.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub account: String,
    pub mailbox: String,
    pub uid: u32,
    pub section: String,
}

impl CacheKey {
    pub fn new(
        account: impl Into<String>,
        mailbox: impl Into<String>,
        uid: u32,
        section: impl Into<String>,
    ) -> Self {
        CacheKey {
            account: account.into(),
            mailbox: mailbox.into(),
            uid: uid.into(),
            section: section.into(),
        }
    }

    /// Injective flat form: fields joined with `|`, with `\` and `|`
    /// escaped so the separator stays unambiguous.
    pub fn canonical(&self) -> String {
        fn escape(out: &mut String, field: &str) {
            for ch in field.chars() {
                if ch == '\\' || ch == '|' {
                    out.push('\\');
                }
                out.push(ch);
            }
        }
        let mut out = String::with_capacity(
            self.account.len() + self.mailbox.len() + self.section.len() + 16,
        );
        escape(&mut out, &self.account);
        out.push('|');
        escape(&mut out, &self.mailbox);
        out.push('|');
        out.push_str(&self.uid.to_string());
        out.push('|');
        escape(&mut out, &self.section);
        out
    }
}

/// Monotone operation counters, shared across sessions.
#[derive(Debug, Default)]
pub struct CacheStats {
    hits: AtomicU64,
    misses: AtomicU64,
    get_bytes: AtomicU64,
    set_bytes: AtomicU64,
    evictions: AtomicU64,
}

impl CacheStats {
    pub fn record_hit(&self, payload_bytes: u64) {
        self.hits.fetch_add(1, Ordering::Relaxed);
        self.get_bytes.fetch_add(payload_bytes, Ordering::Relaxed);
    }

    pub fn record_miss(&self) {
        self.misses.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_set(&self, payload_bytes: u64, evicted: u64) {
        self.set_bytes.fetch_add(payload_bytes, Ordering::Relaxed);
        self.evictions.fetch_add(evicted, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            get_bytes: self.get_bytes.load(Ordering::Relaxed),
            set_bytes: self.set_bytes.load(Ordering::Relaxed),
            evictions: self.evictions.load(Ordering::Relaxed),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsSnapshot {
    pub hits: u64,
    pub misses: u64,
    pub get_bytes: u64,
    pub set_bytes: u64,
    pub evictions: u64,
}

impl StatsSnapshot {
    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

/// One sampled row of the stats time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimestampedStats {
    pub timestamp: f64,
    #[serde(flatten)]
    pub stats: StatsSnapshot,
}

/// Writes the series as CSV: timestamp, hits, misses, get_bytes,
/// set_bytes, evictions.
pub fn write_stats_csv<W: std::io::Write>(
    writer: W,
    series: &[TimestampedStats],
) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["timestamp", "hits", "misses", "get_bytes", "set_bytes", "evictions"])?;
    for row in series {
        out.write_record(&[
            row.timestamp.to_string(),
            row.stats.hits.to_string(),
            row.stats.misses.to_string(),
            row.stats.get_bytes.to_string(),
            row.stats.set_bytes.to_string(),
            row.stats.evictions.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
