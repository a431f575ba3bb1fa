use std::collections::HashMap;

use super::{Ghost, OrderedSet};
use crate::error::Result;
use crate::events::EntryId;
use crate::policy::{empty_victim, not_resident, Access, Policy};

const FREQ_CAP: u8 = 3;

/// S3-FIFO: a small probationary FIFO, a main FIFO with lazy reinsertion,
/// and a ghost FIFO of keys evicted from the small queue.
#[derive(Debug)]
pub struct S3Fifo {
    small_cap: usize,
    small: OrderedSet,
    main: OrderedSet,
    ghost: Ghost,
    freq: HashMap<EntryId, u8>,
    keys: HashMap<EntryId, u64>,
}

impl S3Fifo {
    pub fn new(capacity: usize) -> Self {
        Self {
            small_cap: (capacity / 10).max(1),
            small: OrderedSet::new(),
            main: OrderedSet::new(),
            ghost: Ghost::new(capacity),
            freq: HashMap::new(),
            keys: HashMap::new(),
        }
    }

    fn drop_entry(&mut self, id: EntryId) -> EntryId {
        self.freq.remove(&id);
        self.keys.remove(&id);
        id
    }
}

impl Policy for S3Fifo {
    fn name(&self) -> &'static str {
        "s3fifo"
    }

    fn describe(&self) -> String {
        format!("s3fifo(small={},ghost={})", self.small_cap, self.ghost.cap)
    }

    fn len(&self) -> usize {
        self.small.len() + self.main.len()
    }

    fn on_hit(&mut self, a: &Access<'_>) -> Result<()> {
        let f = self.freq.get_mut(&a.entry).ok_or_else(|| not_resident("s3fifo", a.entry))?;
        *f = (*f + 1).min(FREQ_CAP);
        Ok(())
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        self.freq.insert(a.entry, 0);
        self.keys.insert(a.entry, a.key);
        if self.ghost.remove(a.key) {
            self.main.push_back(a.entry);
        } else {
            self.small.push_back(a.entry);
        }
        Ok(())
    }

    fn choose_victim(&mut self, _t: u64) -> Result<EntryId> {
        if self.len() == 0 {
            return Err(empty_victim("s3fifo"));
        }
        loop {
            if self.small.len() >= self.small_cap || self.main.is_empty() {
                if let Some(id) = self.small.pop_front() {
                    if self.freq[&id] > 1 {
                        self.freq.insert(id, 0);
                        self.main.push_back(id);
                        continue;
                    }
                    self.ghost.push(self.keys[&id]);
                    return Ok(self.drop_entry(id));
                }
            }
            let id = self.main.pop_front().expect("main nonempty");
            let f = self.freq.get_mut(&id).expect("tracked");
            if *f > 0 {
                *f -= 1;
                self.main.push_back(id);
            } else {
                return Ok(self.drop_entry(id));
            }
        }
    }
}
