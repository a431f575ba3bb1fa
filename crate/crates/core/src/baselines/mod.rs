//! Baseline eviction policies and the offline optimum.

pub mod arc;
pub mod belady;
pub mod clock;
pub mod fifo;
pub mod lecar;
pub mod lhd;
pub mod lru;
pub mod s3fifo;
pub mod sieve;
pub mod tinylfu;
pub mod ttl;
pub mod two_q;

use std::collections::{BTreeMap, HashMap};

/// Insertion-ordered set of ids with O(log n) removal and move-to-back.
/// Front is the oldest element.
#[derive(Debug, Clone, Default)]
pub(crate) struct OrderedSet {
    order: BTreeMap<u64, u64>,
    pos: HashMap<u64, u64>,
    seq: u64,
}

impl OrderedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.pos.contains_key(&id)
    }

    /// Appends `id` (or moves it) to the back.
    pub fn push_back(&mut self, id: u64) {
        self.remove(id);
        self.seq += 1;
        self.order.insert(self.seq, id);
        self.pos.insert(id, self.seq);
    }

    pub fn remove(&mut self, id: u64) -> bool {
        match self.pos.remove(&id) {
            Some(s) => {
                self.order.remove(&s);
                true
            }
            None => false,
        }
    }

    pub fn front(&self) -> Option<u64> {
        self.order.values().next().copied()
    }

    pub fn pop_front(&mut self) -> Option<u64> {
        let (_, id) = self.order.pop_first()?;
        self.pos.remove(&id);
        Some(id)
    }

    /// The element after `id` toward the back, if any.
    pub fn next_after(&self, id: u64) -> Option<u64> {
        let s = *self.pos.get(&id)?;
        self.order.range(s + 1..).next().map(|(_, v)| *v)
    }
}

/// Bounded FIFO of item keys remembered after eviction.
#[derive(Debug, Clone)]
pub(crate) struct Ghost {
    keys: OrderedSet,
    cap: usize,
}

impl Ghost {
    pub fn new(cap: usize) -> Self {
        Self { keys: OrderedSet::new(), cap }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn contains(&self, key: u64) -> bool {
        self.keys.contains(key)
    }

    pub fn remove(&mut self, key: u64) -> bool {
        self.keys.remove(key)
    }

    pub fn push(&mut self, key: u64) {
        if self.cap == 0 {
            return;
        }
        self.keys.push_back(key);
        while self.keys.len() > self.cap {
            self.keys.pop_front();
        }
    }

    pub fn pop_oldest(&mut self) -> Option<u64> {
        self.keys.pop_front()
    }
}
