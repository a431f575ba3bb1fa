use super::OrderedSet;
use crate::error::Result;
use crate::events::EntryId;
use crate::policy::{empty_victim, Access, Policy};
use std::collections::HashMap;

/// Fixed lifetime from insertion, no refresh on hit. Entries lapse
/// proactively; a full cache falls back to evicting the oldest insertion.
#[derive(Debug)]
pub struct Ttl {
    lifetime: u64,
    queue: OrderedSet,
    inserted: HashMap<EntryId, u64>,
}

impl Ttl {
    pub fn new(lifetime: u64) -> Self {
        Self { lifetime: lifetime.max(1), queue: OrderedSet::new(), inserted: HashMap::new() }
    }
}

impl Policy for Ttl {
    fn name(&self) -> &'static str {
        "ttl"
    }

    fn describe(&self) -> String {
        format!("ttl(lifetime={})", self.lifetime)
    }

    fn len(&self) -> usize {
        self.queue.len()
    }

    fn on_hit(&mut self, _a: &Access<'_>) -> Result<()> {
        Ok(())
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        self.queue.push_back(a.entry);
        self.inserted.insert(a.entry, a.t);
        Ok(())
    }

    fn choose_victim(&mut self, _t: u64) -> Result<EntryId> {
        let id = self.queue.pop_front().ok_or_else(|| empty_victim("ttl"))?;
        self.inserted.remove(&id);
        Ok(id)
    }

    fn expired(&mut self, t: u64) -> Vec<EntryId> {
        let mut out = Vec::new();
        while let Some(id) = self.queue.front() {
            if t - self.inserted[&id] < self.lifetime {
                break;
            }
            self.queue.pop_front();
            self.inserted.remove(&id);
            out.push(id);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::testkit::drive;

    #[test]
    fn entries_lapse_after_lifetime() {
        // lifetime 2: a@1 still there at 2, gone at 3.
        let mut p = Ttl::new(2);
        assert_eq!(drive(&mut p, &[1, 1, 1], 10).unwrap(), 1);
    }
}
