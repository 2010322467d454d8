//! One cache shard: a strict least-recently-used store with a byte budget.
//!
//! Recency is a monotonically increasing sequence number per access; the
//! BTreeMap over sequence numbers keeps the oldest entry at the front, so
//! eviction pops from there until the new payload fits. Both get and set
//! refresh recency.

use std::collections::{BTreeMap, HashMap};

use super::{CacheError, CacheKey};

#[derive(Debug)]
struct Entry {
    payload: Vec<u8>,
    seq: u64,
}

#[derive(Debug)]
pub struct CacheNode {
    node_id: String,
    capacity_bytes: u64,
    used_bytes: u64,
    entries: HashMap<CacheKey, Entry>,
    recency: BTreeMap<u64, CacheKey>,
    next_seq: u64,
}

impl CacheNode {
    pub fn new(node_id: impl Into<String>, capacity_bytes: u64) -> Result<Self, CacheError> {
        if capacity_bytes == 0 {
            return Err(CacheError::ZeroCapacity);
        }
        Ok(CacheNode {
            node_id: node_id.into(),
            capacity_bytes,
            used_bytes: 0,
            entries: HashMap::new(),
            recency: BTreeMap::new(),
            next_seq: 0,
        })
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.entries.contains_key(key)
    }

    fn touch(recency: &mut BTreeMap<u64, CacheKey>, next_seq: &mut u64, key: &CacheKey, entry: &mut Entry) {
        recency.remove(&entry.seq);
        entry.seq = *next_seq;
        *next_seq += 1;
        recency.insert(entry.seq, key.clone());
    }

    pub fn get(&mut self, key: &CacheKey) -> Option<&[u8]> {
        let entry = self.entries.get_mut(key)?;
        Self::touch(&mut self.recency, &mut self.next_seq, key, entry);
        Some(&entry.payload)
    }

    /// Stores a payload, evicting oldest entries until it fits. Returns
    /// the evicted keys in eviction order. A payload larger than the
    /// whole shard is rejected and nothing changes.
    pub fn set(&mut self, key: &CacheKey, payload: Vec<u8>) -> Result<Vec<CacheKey>, CacheError> {
        let payload_bytes = payload.len() as u64;
        if payload_bytes > self.capacity_bytes {
            return Err(CacheError::PayloadTooLarge {
                payload_bytes,
                capacity_bytes: self.capacity_bytes,
            });
        }
        if let Some(old) = self.entries.remove(key) {
            self.used_bytes -= old.payload.len() as u64;
            self.recency.remove(&old.seq);
        }
        let mut evicted = Vec::new();
        while self.used_bytes + payload_bytes > self.capacity_bytes {
            let (_, victim) = self.recency.pop_first().expect("used_bytes > 0 implies entries");
            let gone = self.entries.remove(&victim).expect("recency tracks entries");
            self.used_bytes -= gone.payload.len() as u64;
            evicted.push(victim);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.used_bytes += payload_bytes;
        self.recency.insert(seq, key.clone());
        self.entries.insert(key.clone(), Entry { payload, seq });
        Ok(evicted)
    }

    pub fn remove(&mut self, key: &CacheKey) -> bool {
        match self.entries.remove(key) {
            Some(entry) => {
                self.used_bytes -= entry.payload.len() as u64;
                self.recency.remove(&entry.seq);
                true
            }
            None => false,
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &CacheKey> {
        self.entries.keys()
    }

    /// Resident keys from least to most recently used.
    pub fn keys_by_recency(&self) -> impl Iterator<Item = &CacheKey> {
        self.recency.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(uid: u32) -> CacheKey {
        CacheKey::new("a", "INBOX", uid, "BODY[]")
    }

    fn payload(bytes: usize) -> Vec<u8> {
        vec![0xA5; bytes]
    }

    #[test]
    fn evicts_least_recent_first() {
        let mut node = CacheNode::new("n0", 100).unwrap();
        node.set(&key(1), payload(40)).unwrap();
        node.set(&key(2), payload(40)).unwrap();
        // Touch 1 so 2 becomes the eviction victim.
        assert!(node.get(&key(1)).is_some());
        let evicted = node.set(&key(3), payload(40)).unwrap();
        assert_eq!(evicted, vec![key(2)]);
        assert!(node.contains(&key(1)));
        assert!(node.contains(&key(3)));
        assert_eq!(node.used_bytes(), 80);
    }

    #[test]
    fn set_refreshes_recency() {
        let mut node = CacheNode::new("n0", 100).unwrap();
        node.set(&key(1), payload(40)).unwrap();
        node.set(&key(2), payload(40)).unwrap();
        node.set(&key(1), payload(40)).unwrap(); // overwrite, now most recent
        let evicted = node.set(&key(3), payload(40)).unwrap();
        assert_eq!(evicted, vec![key(2)]);
    }

    #[test]
    fn overwrite_accounts_bytes_once() {
        let mut node = CacheNode::new("n0", 100).unwrap();
        node.set(&key(1), payload(60)).unwrap();
        node.set(&key(1), payload(30)).unwrap();
        assert_eq!(node.used_bytes(), 30);
        assert_eq!(node.len(), 1);
    }

    #[test]
    fn oversized_payload_rejected_without_eviction() {
        let mut node = CacheNode::new("n0", 100).unwrap();
        node.set(&key(1), payload(90)).unwrap();
        let err = node.set(&key(2), payload(101)).unwrap_err();
        assert_eq!(
            err,
            CacheError::PayloadTooLarge { payload_bytes: 101, capacity_bytes: 100 }
        );
        assert!(node.contains(&key(1)));
        assert_eq!(node.used_bytes(), 90);
    }

    #[test]
    fn exact_fit_evicts_everything_older() {
        let mut node = CacheNode::new("n0", 100).unwrap();
        node.set(&key(1), payload(50)).unwrap();
        node.set(&key(2), payload(50)).unwrap();
        let evicted = node.set(&key(3), payload(100)).unwrap();
        assert_eq!(evicted, vec![key(1), key(2)]);
        assert_eq!(node.used_bytes(), 100);
    }

    #[test]
    fn remove_frees_budget() {
        let mut node = CacheNode::new("n0", 100).unwrap();
        node.set(&key(1), payload(70)).unwrap();
        assert!(node.remove(&key(1)));
        assert!(!node.remove(&key(1)));
        assert_eq!(node.used_bytes(), 0);
        assert!(node.set(&key(2), payload(100)).unwrap().is_empty());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// Reference LRU built on a flat vector: most recent at the back,
        /// evictions scan from the front.
        struct OracleLru {
            capacity: u64,
            used: u64,
            order: Vec<(CacheKey, u64)>,
        }

        impl OracleLru {
            fn new(capacity: u64) -> Self {
                OracleLru { capacity, used: 0, order: Vec::new() }
            }

            fn get(&mut self, key: &CacheKey) -> bool {
                match self.order.iter().position(|(k, _)| k == key) {
                    Some(idx) => {
                        let entry = self.order.remove(idx);
                        self.order.push(entry);
                        true
                    }
                    None => false,
                }
            }

            fn set(&mut self, key: &CacheKey, bytes: u64) -> Option<Vec<CacheKey>> {
                if bytes > self.capacity {
                    return None;
                }
                if let Some(idx) = self.order.iter().position(|(k, _)| k == key) {
                    let (_, old) = self.order.remove(idx);
                    self.used -= old;
                }
                let mut evicted = Vec::new();
                while self.used + bytes > self.capacity {
                    let (victim, freed) = self.order.remove(0);
                    self.used -= freed;
                    evicted.push(victim);
                }
                self.used += bytes;
                self.order.push((key.clone(), bytes));
                Some(evicted)
            }
        }

        proptest! {
            #[test]
            fn matches_reference_lru(ops in proptest::collection::vec(
                (0u32..30, 1u64..120, proptest::bool::ANY), 1..400)) {
                let mut node = CacheNode::new("n0", 256).unwrap();
                let mut oracle = OracleLru::new(256);
                for (uid, bytes, is_set) in ops {
                    let k = key(uid);
                    if is_set {
                        let got = node.set(&k, payload(bytes as usize));
                        let want = oracle.set(&k, bytes);
                        match want {
                            Some(evicted) => prop_assert_eq!(got.unwrap(), evicted),
                            None => prop_assert!(got.is_err()),
                        }
                    } else {
                        prop_assert_eq!(node.get(&k).is_some(), oracle.get(&k));
                    }
                    prop_assert!(node.used_bytes() <= 256);
                    prop_assert_eq!(node.used_bytes(), oracle.used);
                    let mut mine: Vec<CacheKey> = node.keys_by_recency().cloned().collect();
                    let theirs: Vec<CacheKey> =
                        oracle.order.iter().map(|(k, _)| k.clone()).collect();
                    prop_assert_eq!(std::mem::take(&mut mine), theirs);
                }
            }
        }
    }
}
