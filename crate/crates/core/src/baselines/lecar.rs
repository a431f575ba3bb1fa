use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::OrderedSet;
use crate::error::Result;
use crate::events::EntryId;
use crate::policy::{empty_victim, not_resident, Access, Policy};

const LEARNING_RATE: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Expert {
    Lru,
    Lfu,
}

#[derive(Debug, Clone, Copy)]
struct Meta {
    freq: u64,
    last: u64,
}

/// LeCaR: regret minimization over an LRU and an LFU expert. Each eviction
/// samples an expert by weight; a later miss on a key an expert evicted
/// shrinks that expert's weight by a factor discounted by how long ago it
/// happened.
#[derive(Debug)]
pub struct LeCaR {
    capacity: usize,
    discount: f64,
    w_lru: f64,
    meta: HashMap<EntryId, Meta>,
    keys: HashMap<EntryId, u64>,
    recency: OrderedSet,
    /// Evicted key -> (expert, eviction time), one FIFO per expert.
    history: HashMap<u64, (Expert, u64)>,
    hist_lru: OrderedSet,
    hist_lfu: OrderedSet,
    rng: ChaCha8Rng,
}

impl LeCaR {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Self {
            capacity,
            discount: 0.005f64.powf(1.0 / capacity.max(1) as f64),
            w_lru: 0.5,
            meta: HashMap::new(),
            keys: HashMap::new(),
            recency: OrderedSet::new(),
            history: HashMap::new(),
            hist_lru: OrderedSet::new(),
            hist_lfu: OrderedSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn lfu_candidate(&self) -> Option<EntryId> {
        self.meta
            .iter()
            .min_by(|(ia, a), (ib, b)| a.freq.cmp(&b.freq).then(a.last.cmp(&b.last)).then(ia.cmp(ib)))
            .map(|(id, _)| *id)
    }

    fn remember(&mut self, key: u64, expert: Expert, t: u64) {
        let list = match expert {
            Expert::Lru => &mut self.hist_lru,
            Expert::Lfu => &mut self.hist_lfu,
        };
        list.push_back(key);
        let mut dropped = None;
        if list.len() > self.capacity {
            dropped = list.pop_front();
        }
        if let Some(d) = dropped {
            self.history.remove(&d);
        }
        self.history.insert(key, (expert, t));
    }

    fn forget_key(&mut self, key: u64) -> Option<(Expert, u64)> {
        let h = self.history.remove(&key)?;
        match h.0 {
            Expert::Lru => self.hist_lru.remove(key),
            Expert::Lfu => self.hist_lfu.remove(key),
        };
        Some(h)
    }

    pub fn lru_weight(&self) -> f64 {
        self.w_lru
    }
}

impl Policy for LeCaR {
    fn name(&self) -> &'static str {
        "lecar"
    }

    fn describe(&self) -> String {
        format!("lecar(eta={LEARNING_RATE},discount={:.6},history={})", self.discount, self.capacity)
    }

    fn len(&self) -> usize {
        self.meta.len()
    }

    fn on_hit(&mut self, a: &Access<'_>) -> Result<()> {
        let m = self.meta.get_mut(&a.entry).ok_or_else(|| not_resident("lecar", a.entry))?;
        m.freq += 1;
        m.last = a.t;
        self.recency.push_back(a.entry);
        Ok(())
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        if let Some((expert, when)) = self.forget_key(a.key) {
            let regret = self.discount.powf((a.t - when) as f64);
            let (mut w_lru, mut w_lfu) = (self.w_lru, 1.0 - self.w_lru);
            match expert {
                Expert::Lru => w_lru *= (-LEARNING_RATE * regret).exp(),
                Expert::Lfu => w_lfu *= (-LEARNING_RATE * regret).exp(),
            }
            self.w_lru = w_lru / (w_lru + w_lfu);
        }
        self.meta.insert(a.entry, Meta { freq: 1, last: a.t });
        self.keys.insert(a.entry, a.key);
        self.recency.push_back(a.entry);
        Ok(())
    }

    fn choose_victim(&mut self, t: u64) -> Result<EntryId> {
        let lru = self.recency.front().ok_or_else(|| empty_victim("lecar"))?;
        let lfu = self.lfu_candidate().expect("nonempty");
        let expert = if self.rng.random::<f64>() < self.w_lru { Expert::Lru } else { Expert::Lfu };
        let victim = if expert == Expert::Lru { lru } else { lfu };
        self.recency.remove(victim);
        self.meta.remove(&victim);
        let key = self.keys.remove(&victim).expect("tracked");
        if lru != lfu {
            self.remember(key, expert, t);
        }
        Ok(victim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::testkit::drive;

    #[test]
    fn deterministic_per_seed() {
        let keys: Vec<u64> = (0..300u64).map(|i| (i * 7919) % 23).collect();
        let a = drive(&mut LeCaR::new(5, 3), &keys, 5).unwrap();
        let b = drive(&mut LeCaR::new(5, 3), &keys, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scan_resistance_shifts_weight_to_lfu() {
        // Warmed-up hot keys interleaved with a one-shot scan: LRU's mistakes
        // on hot keys should pull weight toward LFU.
        let mut keys = Vec::new();
        for _ in 0..5 {
            keys.extend([0, 1, 2]);
        }
        for i in 0..400u64 {
            keys.push(i % 3);
            keys.push(1000 + i);
            keys.push(2000 + i);
        }
        let mut p = LeCaR::new(4, 1);
        drive(&mut p, &keys, 4).unwrap();
        assert!(p.lru_weight() < 0.5, "w_lru = {}", p.lru_weight());
    }
}
