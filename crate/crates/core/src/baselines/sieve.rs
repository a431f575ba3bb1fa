use std::collections::HashMap;

use super::OrderedSet;
use crate::error::Result;
use crate::events::EntryId;
use crate::policy::{empty_victim, not_resident, Access, Policy};

/// SIEVE: a FIFO list with visited bits and a hand that sweeps from the tail
/// (oldest) toward the head, clearing bits until it finds an unvisited entry.
/// The sweep runs before the new entry joins the list.
#[derive(Debug)]
pub struct Sieve {
    capacity: usize,
    list: OrderedSet,
    visited: HashMap<EntryId, bool>,
    hand: Option<EntryId>,
    pending: Option<EntryId>,
}

impl Sieve {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, list: OrderedSet::new(), visited: HashMap::new(), hand: None, pending: None }
    }

    fn sweep(&mut self) -> Option<EntryId> {
        let mut o = self.hand.filter(|h| self.list.contains(*h)).or_else(|| self.list.front())?;
        while self.visited[&o] {
            self.visited.insert(o, false);
            o = self.list.next_after(o).or_else(|| self.list.front()).expect("nonempty");
        }
        self.hand = self.list.next_after(o);
        self.list.remove(o);
        self.visited.remove(&o);
        Some(o)
    }
}

impl Policy for Sieve {
    fn name(&self) -> &'static str {
        "sieve"
    }

    fn len(&self) -> usize {
        self.list.len() + usize::from(self.pending.is_some())
    }

    fn on_hit(&mut self, a: &Access<'_>) -> Result<()> {
        match self.visited.get_mut(&a.entry) {
            Some(v) => {
                *v = true;
                Ok(())
            }
            None => Err(not_resident("sieve", a.entry)),
        }
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        if self.list.len() >= self.capacity {
            self.pending = self.sweep();
        }
        self.list.push_back(a.entry);
        self.visited.insert(a.entry, false);
        Ok(())
    }

    fn choose_victim(&mut self, _t: u64) -> Result<EntryId> {
        match self.pending.take() {
            Some(v) => Ok(v),
            None => self.sweep().ok_or_else(|| empty_victim("sieve")),
        }
    }
}
