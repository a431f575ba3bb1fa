use std::collections::HashMap;

use super::{Ghost, OrderedSet};
use crate::error::Result;
use crate::events::EntryId;
use crate::policy::{empty_victim, not_resident, Access, Policy};

/// Full 2Q: a FIFO probation queue (A1in), a ghost of keys it pushed out
/// (A1out) and an LRU main queue (Am). Keys remembered by the ghost go
/// straight to Am on their next miss.
#[derive(Debug)]
pub struct TwoQ {
    k_in: usize,
    a1in: OrderedSet,
    a1out: Ghost,
    am: OrderedSet,
    keys: HashMap<EntryId, u64>,
}

impl TwoQ {
    pub fn new(capacity: usize) -> Self {
        Self {
            k_in: (capacity / 4).max(1),
            a1in: OrderedSet::new(),
            a1out: Ghost::new((capacity / 2).max(1)),
            am: OrderedSet::new(),
            keys: HashMap::new(),
        }
    }
}

impl Policy for TwoQ {
    fn name(&self) -> &'static str {
        "2q"
    }

    fn describe(&self) -> String {
        format!("2q(kin={},kout={})", self.k_in, self.a1out.cap)
    }

    fn len(&self) -> usize {
        self.a1in.len() + self.am.len()
    }

    fn on_hit(&mut self, a: &Access<'_>) -> Result<()> {
        if self.am.contains(a.entry) {
            self.am.push_back(a.entry);
            Ok(())
        } else if self.a1in.contains(a.entry) {
            Ok(())
        } else {
            Err(not_resident("2q", a.entry))
        }
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        self.keys.insert(a.entry, a.key);
        if self.a1out.remove(a.key) {
            self.am.push_back(a.entry);
        } else {
            self.a1in.push_back(a.entry);
        }
        Ok(())
    }

    fn choose_victim(&mut self, _t: u64) -> Result<EntryId> {
        let id = if self.a1in.len() > self.k_in || (self.am.is_empty() && !self.a1in.is_empty()) {
            let id = self.a1in.pop_front().expect("nonempty");
            self.a1out.push(self.keys[&id]);
            id
        } else {
            self.am.pop_front().ok_or_else(|| empty_victim("2q"))?
        };
        self.keys.remove(&id);
        Ok(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::testkit::drive;

    #[test]
    fn ghost_hit_promotes_to_main() {
        // C=4: kin=1, kout=2. Key 1 falls out of A1in, returns via the ghost
        // into Am, then survives a scan of one-shot keys.
        let mut p = TwoQ::new(4);
        let keys = [1, 2, 3, 4, 5, 1, 6, 7, 8, 1];
        let hits = drive(&mut p, &keys, 4).unwrap();
        assert_eq!(hits, 1);
    }
}
