use std::collections::{HashMap, VecDeque};

use crate::error::Result;
use crate::events::EntryId;
use crate::policy::{empty_victim, not_resident, Access, Policy};

/// One-bit second chance.
#[derive(Debug, Default)]
pub struct Clock {
    ring: VecDeque<EntryId>,
    referenced: HashMap<EntryId, bool>,
}

impl Clock {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Policy for Clock {
    fn name(&self) -> &'static str {
        "clock"
    }

    fn len(&self) -> usize {
        self.ring.len()
    }

    fn on_hit(&mut self, a: &Access<'_>) -> Result<()> {
        match self.referenced.get_mut(&a.entry) {
            Some(r) => {
                *r = true;
                Ok(())
            }
            None => Err(not_resident("clock", a.entry)),
        }
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        self.ring.push_back(a.entry);
        self.referenced.insert(a.entry, false);
        Ok(())
    }

    fn choose_victim(&mut self, _t: u64) -> Result<EntryId> {
        loop {
            let id = self.ring.pop_front().ok_or_else(|| empty_victim("clock"))?;
            let r = self.referenced.get_mut(&id).expect("ring and bits agree");
            if *r {
                *r = false;
                self.ring.push_back(id);
            } else {
                self.referenced.remove(&id);
                return Ok(id);
            }
        }
    }
}
