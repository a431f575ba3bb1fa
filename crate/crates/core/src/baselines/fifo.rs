use super::OrderedSet;
use crate::error::Result;
use crate::events::EntryId;
use crate::policy::{empty_victim, Access, Policy};

/// First in, first out; hits do not reorder.
#[derive(Debug, Default)]
pub struct Fifo {
    queue: OrderedSet,
}

impl Fifo {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Policy for Fifo {
    fn name(&self) -> &'static str {
        "fifo"
    }

    fn len(&self) -> usize {
        self.queue.len()
    }

    fn on_hit(&mut self, _a: &Access<'_>) -> Result<()> {
        Ok(())
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        self.queue.push_back(a.entry);
        Ok(())
    }

    fn choose_victim(&mut self, _t: u64) -> Result<EntryId> {
        self.queue.pop_front().ok_or_else(|| empty_victim("fifo"))
    }
}
