//! Consistent-hash ring. Each node contributes a fixed number of virtual
//! points; a key belongs to the node owning the first point at or after
//! the key's hash, wrapping around. Point positions depend only on the
//! node id and the configured hash, so membership changes leave unrelated
//! ownership untouched.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::Hasher;

use serde::{Deserialize, Serialize};

use super::{CacheError, CacheKey};

pub const DEFAULT_VIRTUAL_POINTS: u32 = 128;

/// Stable non-cryptographic 64-bit hashes. Fnv1a is bit-stable forever;
/// Sip (the standard library hasher with its fixed default keys) is
/// stable within one toolchain, which is all a single deployment needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashKind {
    #[default]
    Fnv1a,
    Sip,
}

pub fn hash_bytes(kind: HashKind, bytes: &[u8]) -> u64 {
    match kind {
        HashKind::Fnv1a => {
            let mut hash: u64 = 0xcbf29ce484222325;
            for &b in bytes {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
            // Raw FNV barely stirs the high bits on short, similar inputs,
            // which skews ring positions badly; finish with a full-width
            // avalanche so points spread over the whole u64 range.
            hash ^= hash >> 33;
            hash = hash.wrapping_mul(0xff51afd7ed558ccd);
            hash ^= hash >> 33;
            hash = hash.wrapping_mul(0xc4ceb9fe1a85ec53);
            hash ^ (hash >> 33)
        }
        HashKind::Sip => {
            let mut hasher = DefaultHasher::new();
            hasher.write(bytes);
            hasher.finish()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemapReport {
    pub sample_size: usize,
    pub moved_keys: usize,
    pub moved_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RingChange {
    Add(String),
    Remove(String),
}

#[derive(Debug, Clone)]
pub struct HashRing {
    kind: HashKind,
    virtual_points: u32,
    ring: BTreeMap<u64, String>,
    points_by_node: HashMap<String, Vec<u64>>,
}

impl HashRing {
    pub fn new(kind: HashKind, virtual_points: u32) -> Result<Self, CacheError> {
        if virtual_points == 0 {
            return Err(CacheError::ZeroVirtualPoints);
        }
        Ok(HashRing { kind, virtual_points, ring: BTreeMap::new(), points_by_node: HashMap::new() })
    }

    pub fn hash_kind(&self) -> HashKind {
        self.kind
    }

    pub fn virtual_points(&self) -> u32 {
        self.virtual_points
    }

    pub fn len(&self) -> usize {
        self.points_by_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points_by_node.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.points_by_node.keys().map(String::as_str)
    }

    pub fn contains_node(&self, node_id: &str) -> bool {
        self.points_by_node.contains_key(node_id)
    }

    pub fn add_node(&mut self, node_id: &str) -> Result<(), CacheError> {
        if self.contains_node(node_id) {
            return Err(CacheError::DuplicateNode(node_id.to_string()));
        }
        let mut points = Vec::with_capacity(self.virtual_points as usize);
        for replica in 0..self.virtual_points {
            // 64-bit collisions are vanishingly rare; the deterministic
            // probe keeps the per-node point count exact anyway.
            let label = format!("{node_id}\u{1f}{replica}");
            let mut point = hash_bytes(self.kind, label.as_bytes());
            while self.ring.contains_key(&point) {
                point = point.wrapping_add(0x9e3779b97f4a7c15);
            }
            self.ring.insert(point, node_id.to_string());
            points.push(point);
        }
        self.points_by_node.insert(node_id.to_string(), points);
        Ok(())
    }

    pub fn remove_node(&mut self, node_id: &str) -> Result<(), CacheError> {
        if !self.contains_node(node_id) {
            return Err(CacheError::UnknownNode(node_id.to_string()));
        }
        if self.points_by_node.len() == 1 {
            return Err(CacheError::LastNode);
        }
        for point in self.points_by_node.remove(node_id).unwrap() {
            self.ring.remove(&point);
        }
        Ok(())
    }

    /// Owner of the first virtual point at or after the key hash.
    pub fn locate(&self, key: &CacheKey) -> Result<&str, CacheError> {
        let hash = hash_bytes(self.kind, key.canonical().as_bytes());
        self.ring
            .range(hash..)
            .next()
            .or_else(|| self.ring.iter().next())
            .map(|(_, node)| node.as_str())
            .ok_or(CacheError::EmptyRing)
    }

    /// Applies a membership change and reports, over the given key
    /// sample, what fraction of keys changed owner.
    pub fn rebalance(
        &mut self,
        change: RingChange,
        sample: &[CacheKey],
    ) -> Result<RemapReport, CacheError> {
        let before: Vec<String> = sample
            .iter()
            .map(|k| self.locate(k).map(str::to_string))
            .collect::<Result<_, _>>()?;
        match &change {
            RingChange::Add(node_id) => self.add_node(node_id)?,
            RingChange::Remove(node_id) => self.remove_node(node_id)?,
        }
        let mut moved = 0usize;
        for (key, owner_before) in sample.iter().zip(&before) {
            if self.locate(key)? != owner_before {
                moved += 1;
            }
        }
        Ok(RemapReport {
            sample_size: sample.len(),
            moved_keys: moved,
            moved_fraction: if sample.is_empty() { 0.0 } else { moved as f64 / sample.len() as f64 },
        })
    }
}
