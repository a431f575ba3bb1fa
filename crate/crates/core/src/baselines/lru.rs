use super::OrderedSet;
use crate::error::Result;
use crate::events::EntryId;
use crate::policy::{empty_victim, not_resident, Access, Policy};

/// Least recently used.
#[derive(Debug, Default)]
pub struct Lru {
    order: OrderedSet,
}

impl Lru {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Policy for Lru {
    fn name(&self) -> &'static str {
        "lru"
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    fn on_hit(&mut self, a: &Access<'_>) -> Result<()> {
        if !self.order.contains(a.entry) {
            return Err(not_resident("lru", a.entry));
        }
        self.order.push_back(a.entry);
        Ok(())
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        self.order.push_back(a.entry);
        Ok(())
    }

    fn choose_victim(&mut self, _t: u64) -> Result<EntryId> {
        self.order.pop_front().ok_or_else(|| empty_victim("lru"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::testkit::drive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Hit iff the number of distinct keys touched since the previous access
    /// to the same key (inclusive of it) is at most `c`.
    fn stack_distance_hits(keys: &[u64], c: usize) -> usize {
        let mut hits = 0;
        for (i, k) in keys.iter().enumerate() {
            if let Some(j) = keys[..i].iter().rposition(|x| x == k) {
                let mut seen: Vec<u64> = keys[j..i].to_vec();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() <= c {
                    hits += 1;
                }
            }
        }
        hits
    }

    #[test]
    fn matches_reuse_distance_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let c = rng.random_range(1..=8);
            let n = rng.random_range(1..=64);
            let universe = rng.random_range(1..=16u64);
            let keys: Vec<u64> = (0..n).map(|_| rng.random_range(0..universe)).collect();
            let mut p = Lru::new();
            assert_eq!(drive(&mut p, &keys, c).unwrap(), stack_distance_hits(&keys, c), "{keys:?} c={c}");
        }
    }
}
