use std::collections::HashMap;

use crate::error::Result;
use crate::events::EntryId;
use crate::policy::{empty_victim, not_resident, Access, Policy};

const CLASSES: usize = 16;
const EWMA: f64 = 0.9;

/// Least hit density. Ages since last access are coarsened into log2
/// classes; per-class hit and eviction counts give each class an expected
/// hits-per-remaining-lifetime density, recomputed every `C` accesses. The
/// victim is the resident whose current class has the lowest density.
#[derive(Debug)]
pub struct Lhd {
    rerank_every: u64,
    accesses: u64,
    hits: [f64; CLASSES],
    evictions: [f64; CLASSES],
    density: [f64; CLASSES],
    last_access: HashMap<EntryId, u64>,
}

fn class(age: u64) -> usize {
    ((64 - (age + 1).leading_zeros() - 1) as usize).min(CLASSES - 1)
}

fn class_width(c: usize) -> f64 {
    (1u64 << c) as f64
}

impl Lhd {
    pub fn new(capacity: usize) -> Self {
        let mut density = [0.0; CLASSES];
        for (c, d) in density.iter_mut().enumerate() {
            // Until the first rerank, behave like LRU.
            *d = 1.0 / (c + 1) as f64;
        }
        Self {
            rerank_every: capacity.max(1) as u64,
            accesses: 0,
            hits: [0.0; CLASSES],
            evictions: [0.0; CLASSES],
            density,
            last_access: HashMap::new(),
        }
    }

    fn tick(&mut self) {
        self.accesses += 1;
        if !self.accesses.is_multiple_of(self.rerank_every) {
            return;
        }
        let (mut events, mut hits, mut lifetime) = (0.0, 0.0, 0.0);
        for c in (0..CLASSES).rev() {
            events += self.hits[c] + self.evictions[c];
            hits += self.hits[c];
            lifetime += events * class_width(c);
            self.density[c] = if lifetime > 0.0 { hits / lifetime } else { 0.0 };
        }
        for c in 0..CLASSES {
            self.hits[c] *= EWMA;
            self.evictions[c] *= EWMA;
        }
    }
}

impl Policy for Lhd {
    fn name(&self) -> &'static str {
        "lhd"
    }

    fn describe(&self) -> String {
        format!("lhd(classes={CLASSES},rerank={})", self.rerank_every)
    }

    fn len(&self) -> usize {
        self.last_access.len()
    }

    fn on_hit(&mut self, a: &Access<'_>) -> Result<()> {
        let last = self.last_access.get_mut(&a.entry).ok_or_else(|| not_resident("lhd", a.entry))?;
        self.hits[class(a.t - *last)] += 1.0;
        *last = a.t;
        self.tick();
        Ok(())
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        self.last_access.insert(a.entry, a.t);
        self.tick();
        Ok(())
    }

    fn choose_victim(&mut self, t: u64) -> Result<EntryId> {
        let (&id, &last) = self
            .last_access
            .iter()
            .min_by(|(ia, la), (ib, lb)| {
                let da = self.density[class(t - **la)];
                let db = self.density[class(t - **lb)];
                da.total_cmp(&db).then(la.cmp(lb)).then(ia.cmp(ib))
            })
            .ok_or_else(|| empty_victim("lhd"))?;
        self.evictions[class(t - last)] += 1.0;
        self.last_access.remove(&id);
        Ok(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::testkit::drive;

    #[test]
    fn age_classes() {
        assert_eq!(class(0), 0);
        assert_eq!(class(1), 1);
        assert_eq!(class(2), 1);
        assert_eq!(class(3), 2);
        assert_eq!(class(1 << 40), CLASSES - 1);
    }

    #[test]
    fn starts_out_like_lru() {
        let mut p = Lhd::new(100);
        assert_eq!(drive(&mut p, &[1, 2, 1, 3, 1, 2], 2).unwrap(), 2);
    }

    #[test]
    fn density_peaks_at_the_reuse_age() {
        // A loop over 6 keys in an 8-slot cache: every hit lands at age 6.
        let mut p = Lhd::new(8);
        let keys: Vec<u64> = (0..400).map(|i| i % 6).collect();
        drive(&mut p, &keys, 8).unwrap();
        let peak = class(6);
        assert!(p.density[peak] > p.density[0]);
        assert!(p.density[0] > p.density[peak + 1]);
    }
}
