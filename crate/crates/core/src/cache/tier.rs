//! The cache as sessions see it: a ring of LRU shards behind one handle.
//!
//! Lookups take the state read-lock plus the owning shard's mutex, so
//! per-shard operations are linearizable and membership changes (which
//! take the write lock) exclude concurrent lookups. Counters are atomic
//! and shared.

use std::collections::HashMap;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::lru::CacheNode;
use super::ring::{HashRing, RemapReport, RingChange};
use super::{CacheError, CacheKey, CacheStats, HashKind, StatsSnapshot};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub node_id: String,
    pub capacity_bytes: u64,
}

struct TierState {
    ring: HashRing,
    nodes: HashMap<String, Mutex<CacheNode>>,
}

pub struct CacheTier {
    state: RwLock<TierState>,
    stats: CacheStats,
}

impl CacheTier {
    pub fn new(
        hash: HashKind,
        virtual_points: u32,
        nodes: &[NodeConfig],
    ) -> Result<Self, CacheError> {
        if nodes.is_empty() {
            return Err(CacheError::EmptyRing);
        }
        let mut ring = HashRing::new(hash, virtual_points)?;
        let mut shards = HashMap::new();
        for cfg in nodes {
            ring.add_node(&cfg.node_id)?;
            shards.insert(
                cfg.node_id.clone(),
                Mutex::new(CacheNode::new(cfg.node_id.clone(), cfg.capacity_bytes)?),
            );
        }
        Ok(CacheTier {
            state: RwLock::new(TierState { ring, nodes: shards }),
            stats: CacheStats::default(),
        })
    }

    pub fn stats(&self) -> StatsSnapshot {
        self.stats.snapshot()
    }

    pub fn node_ids(&self) -> Vec<String> {
        let state = self.state.read().unwrap();
        let mut ids: Vec<String> = state.nodes.keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn used_bytes(&self) -> u64 {
        let state = self.state.read().unwrap();
        state.nodes.values().map(|n| n.lock().unwrap().used_bytes()).sum()
    }

    pub fn entry_count(&self) -> usize {
        let state = self.state.read().unwrap();
        state.nodes.values().map(|n| n.lock().unwrap().len()).sum()
    }

    /// Owning node for a key under the current membership.
    pub fn locate(&self, key: &CacheKey) -> Result<String, CacheError> {
        let state = self.state.read().unwrap();
        state.ring.locate(key).map(str::to_string)
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<Vec<u8>>, CacheError> {
        let state = self.state.read().unwrap();
        let owner = state.ring.locate(key)?;
        let mut node = state.nodes[owner].lock().unwrap();
        match node.get(key) {
            Some(payload) => {
                let payload = payload.to_vec();
                self.stats.record_hit(payload.len() as u64);
                Ok(Some(payload))
            }
            None => {
                self.stats.record_miss();
                Ok(None)
            }
        }
    }

    /// Stores a payload on the owning shard; returns what got evicted.
    pub fn set(&self, key: &CacheKey, payload: Vec<u8>) -> Result<Vec<CacheKey>, CacheError> {
        let state = self.state.read().unwrap();
        let owner = state.ring.locate(key)?;
        let mut node = state.nodes[owner].lock().unwrap();
        let payload_bytes = payload.len() as u64;
        let evicted = node.set(key, payload)?;
        self.stats.record_set(payload_bytes, evicted.len() as u64);
        Ok(evicted)
    }

    /// Drops every cached entry for one (account, mailbox) pair across all
    /// shards. Returns how many entries went away.
    pub fn invalidate_mailbox(&self, account: &str, mailbox: &str) -> u64 {
        let state = self.state.read().unwrap();
        let mut removed = 0;
        for shard in state.nodes.values() {
            let mut node = shard.lock().unwrap();
            let doomed: Vec<CacheKey> = node
                .keys()
                .filter(|k| k.account == account && k.mailbox == mailbox)
                .cloned()
                .collect();
            for key in doomed {
                node.remove(&key);
                removed += 1;
            }
        }
        removed
    }

    /// Adds a shard, reporting the ownership churn over the key sample.
    /// Entries whose owner changed are dropped from their old shard: they
    /// would be unreachable and would squat on the byte budget.
    pub fn add_node(
        &self,
        cfg: NodeConfig,
        sample: &[CacheKey],
    ) -> Result<RemapReport, CacheError> {
        let mut state = self.state.write().unwrap();
        if state.nodes.contains_key(&cfg.node_id) {
            return Err(CacheError::DuplicateNode(cfg.node_id));
        }
        let shard = CacheNode::new(cfg.node_id.clone(), cfg.capacity_bytes)?;
        let report = state.ring.rebalance(RingChange::Add(cfg.node_id.clone()), sample)?;
        state.nodes.insert(cfg.node_id, Mutex::new(shard));
        Self::drop_misplaced(&mut state);
        Ok(report)
    }

    /// Removes a shard (and its entries), reporting ownership churn.
    pub fn remove_node(
        &self,
        node_id: &str,
        sample: &[CacheKey],
    ) -> Result<RemapReport, CacheError> {
        let mut state = self.state.write().unwrap();
        let report = state.ring.rebalance(RingChange::Remove(node_id.to_string()), sample)?;
        state.nodes.remove(node_id);
        Ok(report)
    }

    fn drop_misplaced(state: &mut TierState) {
        let ring = &state.ring;
        for (node_id, shard) in &state.nodes {
            let mut node = shard.lock().unwrap();
            let misplaced: Vec<CacheKey> = node
                .keys()
                .filter(|k| ring.locate(k).map(|owner| owner != node_id).unwrap_or(true))
                .cloned()
                .collect();
            for key in misplaced {
                node.remove(&key);
            }
        }
    }
}
