use std::collections::HashMap;

use super::OrderedSet;
use crate::error::Result;
use crate::events::EntryId;
use crate::policy::{empty_victim, not_resident, Access, Policy};

const ROWS: usize = 4;
const COUNTER_MAX: u8 = 15;

/// Count-min sketch of 4-bit counters that halves itself every `sample`
/// increments.
#[derive(Debug, Clone)]
pub struct CountMin {
    width: usize,
    table: Vec<u8>,
    added: u64,
    sample: u64,
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl CountMin {
    pub fn new(width: usize, sample: u64) -> Self {
        let width = width.max(1);
        Self { width, table: vec![0; ROWS * width], added: 0, sample: sample.max(1) }
    }

    fn slot(&self, row: usize, key: u64) -> usize {
        let h = mix(key ^ (row as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        row * self.width + (h % self.width as u64) as usize
    }

    pub fn increment(&mut self, key: u64) {
        for r in 0..ROWS {
            let s = self.slot(r, key);
            if self.table[s] < COUNTER_MAX {
                self.table[s] += 1;
            }
        }
        self.added += 1;
        if self.added >= self.sample {
            self.table.iter_mut().for_each(|c| *c /= 2);
            self.added /= 2;
        }
    }

    pub fn estimate(&self, key: u64) -> u8 {
        (0..ROWS).map(|r| self.table[self.slot(r, key)]).min().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Segment {
    Window,
    Probation,
    Protected,
}

/// W-TinyLFU: an LRU admission window in front of a segmented-LRU main
/// cache; an entry leaving the window displaces the main cache's LRU victim
/// only if the sketch has seen it more often.
#[derive(Debug)]
pub struct TinyLfu {
    window_cap: usize,
    protected_cap: usize,
    main_cap: usize,
    window: OrderedSet,
    probation: OrderedSet,
    protected: OrderedSet,
    segment: HashMap<EntryId, Segment>,
    keys: HashMap<EntryId, u64>,
    sketch: CountMin,
    pending: Option<EntryId>,
}

impl TinyLfu {
    pub fn new(capacity: usize) -> Self {
        let window_cap = (capacity / 100).max(1).min(capacity);
        let main_cap = capacity - window_cap;
        Self {
            window_cap,
            protected_cap: main_cap * 4 / 5,
            main_cap,
            window: OrderedSet::new(),
            probation: OrderedSet::new(),
            protected: OrderedSet::new(),
            segment: HashMap::new(),
            keys: HashMap::new(),
            sketch: CountMin::new(4 * capacity, 10 * capacity as u64),
            pending: None,
        }
    }

    fn main_len(&self) -> usize {
        self.probation.len() + self.protected.len()
    }

    fn demote_to_probation(&mut self, id: EntryId) {
        self.probation.push_back(id);
        self.segment.insert(id, Segment::Probation);
    }

    fn forget(&mut self, id: EntryId) {
        self.segment.remove(&id);
        self.keys.remove(&id);
    }

    /// Moves the window's overflow into main, dueling with main's victim
    /// when main is full. Returns the loser, if anyone had to leave.
    fn settle_window(&mut self) -> Option<EntryId> {
        if self.window.len() <= self.window_cap {
            return None;
        }
        let cand = self.window.pop_front().expect("window overflow");
        if self.main_len() < self.main_cap {
            self.demote_to_probation(cand);
            return None;
        }
        let victim = self.probation.front().or_else(|| self.protected.front());
        let Some(victim) = victim else {
            return Some(cand);
        };
        if self.sketch.estimate(self.keys[&cand]) > self.sketch.estimate(self.keys[&victim]) {
            if !self.probation.remove(victim) {
                self.protected.remove(victim);
            }
            self.demote_to_probation(cand);
            Some(victim)
        } else {
            Some(cand)
        }
    }
}

impl Policy for TinyLfu {
    fn name(&self) -> &'static str {
        "tinylfu"
    }

    fn describe(&self) -> String {
        format!(
            "tinylfu(window={},main={},protected={},sketch=4x{},sample={})",
            self.window_cap, self.main_cap, self.protected_cap, self.sketch.width, self.sketch.sample
        )
    }

    fn len(&self) -> usize {
        self.window.len() + self.main_len() + usize::from(self.pending.is_some())
    }

    fn on_hit(&mut self, a: &Access<'_>) -> Result<()> {
        self.sketch.increment(a.key);
        match self.segment.get(&a.entry).copied() {
            Some(Segment::Window) => self.window.push_back(a.entry),
            Some(Segment::Protected) => self.protected.push_back(a.entry),
            Some(Segment::Probation) => {
                self.probation.remove(a.entry);
                self.protected.push_back(a.entry);
                self.segment.insert(a.entry, Segment::Protected);
                while self.protected.len() > self.protected_cap {
                    let d = self.protected.pop_front().expect("nonempty");
                    self.demote_to_probation(d);
                }
            }
            None => return Err(not_resident("tinylfu", a.entry)),
        }
        Ok(())
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        self.sketch.increment(a.key);
        self.window.push_back(a.entry);
        self.segment.insert(a.entry, Segment::Window);
        self.keys.insert(a.entry, a.key);
        if let Some(loser) = self.settle_window() {
            self.forget(loser);
            self.pending = Some(loser);
        }
        Ok(())
    }

    fn choose_victim(&mut self, _t: u64) -> Result<EntryId> {
        if let Some(v) = self.pending.take() {
            return Ok(v);
        }
        let v = self
            .window
            .pop_front()
            .or_else(|| self.probation.pop_front())
            .or_else(|| self.protected.pop_front())
            .ok_or_else(|| empty_victim("tinylfu"))?;
        self.forget(v);
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::testkit::drive;

    #[test]
    fn sketch_counts_and_halves() {
        let mut s = CountMin::new(64, 1000);
        for _ in 0..5 {
            s.increment(7);
        }
        assert_eq!(s.estimate(7), 5);
        for _ in 0..30 {
            s.increment(7);
        }
        assert_eq!(s.estimate(7), COUNTER_MAX);
        let mut s = CountMin::new(64, 4);
        for _ in 0..4 {
            s.increment(3);
        }
        assert_eq!(s.estimate(3), 2);
    }

    #[test]
    fn frequent_key_beats_one_shot() {
        // C=4 -> window 1, main 3. Key 1 is hot; cold keys lose the duel.
        let mut p = TinyLfu::new(4);
        let mut keys = vec![1, 1, 1, 2, 3, 4];
        keys.extend(100..120);
        keys.push(1);
        let hits = drive(&mut p, &keys, 4).unwrap();
        assert_eq!(hits, 3);
    }
}
