//! Lock-free byte and request counters shared by every proxy session.
//! Snapshots feed the offset estimator, so the split matters: upstream
//! bytes are what the proxy still costs the network, hit bytes are what
//! the cache kept off it.

use std::sync::atomic::{AtomicU64, Ordering};

use greenproxy_core::carbon::TrafficSnapshot;

#[derive(Debug, Default)]
pub struct TrafficLedger {
    bytes_to_upstream: AtomicU64,
    bytes_from_upstream: AtomicU64,
    requests_to_upstream: AtomicU64,
    hits: AtomicU64,
    misses: AtomicU64,
    hit_bytes: AtomicU64,
    miss_bytes: AtomicU64,
}

impl TrafficLedger {
    pub fn new() -> Self {
        TrafficLedger::default()
    }

    pub fn add_to_upstream(&self, bytes: u64) {
        self.bytes_to_upstream.fetch_add(bytes, Ordering::Relaxed);
    }

    pub fn add_from_upstream(&self, bytes: u64) {
        self.bytes_from_upstream.fetch_add(bytes, Ordering::Relaxed);
    }

    /// One command line sent upstream; literal continuations do not count.
    pub fn record_upstream_request(&self) {
        self.requests_to_upstream.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_hit(&self, payload_bytes: u64) {
        self.hits.fetch_add(1, Ordering::Relaxed);
        self.hit_bytes.fetch_add(payload_bytes, Ordering::Relaxed);
    }

    /// A miss is recorded when the cache comes up empty; the payload bytes
    /// arrive separately once the upstream actually delivered them.
    pub fn record_miss(&self) {
        self.misses.fetch_add(1, Ordering::Relaxed);
    }

    pub fn add_miss_bytes(&self, payload_bytes: u64) {
        self.miss_bytes.fetch_add(payload_bytes, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> TrafficSnapshot {
        TrafficSnapshot {
            bytes_to_upstream: self.bytes_to_upstream.load(Ordering::Relaxed),
            bytes_from_upstream: self.bytes_from_upstream.load(Ordering::Relaxed),
            requests_to_upstream: self.requests_to_upstream.load(Ordering::Relaxed),
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            hit_bytes: self.hit_bytes.load(Ordering::Relaxed),
            miss_bytes: self.miss_bytes.load(Ordering::Relaxed),
        }
    }
}
