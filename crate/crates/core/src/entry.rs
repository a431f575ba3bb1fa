use crate::embedding::EmbeddingVector;
use crate::events::EntryId;

pub type TopicId = u64;

/// A resident cache entry together with its structural statistics.
#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub entry_id: EntryId,
    /// Exact-match identity of the request that created the entry.
    pub key: u64,
    pub embedding: EmbeddingVector,
    /// Topic label; 0 until routed.
    pub topic: TopicId,
    pub freq: u64,
    pub dep: u64,
    /// Dependency parent (`par`), once detected.
    pub parent: Option<EntryId>,
    /// Set once parent detection has given up for good.
    pub parent_final: bool,
    pub last_access: u64,
    pub insert_time: u64,
}

impl CacheEntry {
    pub fn new(entry_id: EntryId, key: u64, embedding: EmbeddingVector, t: u64) -> Self {
        Self {
            entry_id,
            key,
            embedding,
            topic: 0,
            freq: 0,
            dep: 0,
            parent: None,
            parent_final: false,
            last_access: t,
            insert_time: t,
        }
    }

    /// `freq + lambda * dep`, always derived from the counters.
    #[inline]
    pub fn tsi(&self, lambda: f64) -> f64 {
        self.freq as f64 + lambda * self.dep as f64
    }
}
