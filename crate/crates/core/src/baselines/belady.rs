use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::events::EntryId;
use crate::policy::{empty_victim, not_resident, Access, Policy};
use crate::trace::Trace;

/// Whether a miss must be admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BeladyMode {
    /// Every miss is inserted and some other resident leaves. Optimal among
    /// always-admit policies.
    ForcedAdmission,
    /// The missed item competes with the residents and may itself be the one
    /// dropped. Optimal among all policies, including those that reject or
    /// immediately evict a new entry.
    #[default]
    Bypass,
}

impl BeladyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ForcedAdmission => "forced",
            Self::Bypass => "bypass",
        }
    }
}

const NEVER: u64 = u64::MAX;

/// For each position, the time of the next request with the same key.
fn next_uses(keys: &[u64]) -> Vec<u64> {
    let mut next = vec![NEVER; keys.len()];
    let mut seen: HashMap<u64, u64> = HashMap::new();
    for i in (0..keys.len()).rev() {
        if let Some(&t) = seen.get(&keys[i]) {
            next[i] = t;
        }
        seen.insert(keys[i], i as u64 + 1);
    }
    next
}

fn exact_keys(trace: &Trace) -> Result<Vec<u64>> {
    trace
        .requests
        .iter()
        .map(|r| r.exact_key.ok_or_else(|| Error::usage(format!("belady needs exact keys; request {} has none", r.id))))
        .collect()
}

/// Evicts the farthest next use (never-again first). Ties go to the smaller
/// candidate. `new` is the entry just inserted, eligible only under bypass.
fn farthest<'a>(
    candidates: impl Iterator<Item = (&'a u64, &'a u64)>,
    new: Option<u64>,
    mode: BeladyMode,
) -> Option<u64> {
    candidates
        .filter(|(id, _)| mode == BeladyMode::Bypass || Some(**id) != new)
        .max_by(|(ia, na), (ib, nb)| na.cmp(nb).then(ib.cmp(ia)))
        .map(|(id, _)| *id)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeladyResult {
    pub hits: usize,
    /// Key dropped at each step (the missed key itself on a bypass).
    pub victims: Vec<Option<u64>>,
}

/// Offline optimum for exact-key hits at capacity `capacity`.
pub fn belady_min(trace: &Trace, capacity: usize, mode: BeladyMode) -> Result<BeladyResult> {
    belady_keys(&exact_keys(trace)?, capacity, mode)
}

pub fn belady_keys(keys: &[u64], capacity: usize, mode: BeladyMode) -> Result<BeladyResult> {
    if capacity == 0 {
        return Err(Error::usage("capacity must be at least 1"));
    }
    let next = next_uses(keys);
    // key -> next use
    let mut cache: HashMap<u64, u64> = HashMap::new();
    let mut hits = 0;
    let mut victims = Vec::with_capacity(keys.len());
    for (i, &k) in keys.iter().enumerate() {
        let hit = cache.contains_key(&k);
        hits += usize::from(hit);
        cache.insert(k, next[i]);
        let mut victim = None;
        if cache.len() > capacity {
            let v = farthest(cache.iter(), Some(k), mode).expect("over capacity");
            cache.remove(&v);
            victim = Some(v);
        }
        victims.push(victim);
    }
    Ok(BeladyResult { hits, victims })
}

/// The oracle behind the online interface, for use inside the simulator.
#[derive(Debug)]
pub struct Belady {
    mode: BeladyMode,
    next: Vec<u64>,
    resident: HashMap<EntryId, u64>,
    newest: Option<EntryId>,
}

impl Belady {
    pub fn new(trace: &Trace, capacity: usize, mode: BeladyMode) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::usage("capacity must be at least 1"));
        }
        Ok(Self { mode, next: next_uses(&exact_keys(trace)?), resident: HashMap::new(), newest: None })
    }

    fn next_after(&self, t: u64) -> Result<u64> {
        self.next
            .get((t as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::usage(format!("belady: step {t} is outside the trace")))
    }
}

impl Policy for Belady {
    fn name(&self) -> &'static str {
        "belady"
    }

    fn describe(&self) -> String {
        format!("belady(mode={})", self.mode.as_str())
    }

    fn len(&self) -> usize {
        self.resident.len()
    }

    fn on_hit(&mut self, a: &Access<'_>) -> Result<()> {
        let n = self.next_after(a.t)?;
        let slot = self.resident.get_mut(&a.entry).ok_or_else(|| not_resident("belady", a.entry))?;
        *slot = n;
        Ok(())
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        let n = self.next_after(a.t)?;
        self.resident.insert(a.entry, n);
        self.newest = Some(a.entry);
        Ok(())
    }

    fn choose_victim(&mut self, _t: u64) -> Result<EntryId> {
        let v = farthest(self.resident.iter(), self.newest, self.mode).ok_or_else(|| empty_victim("belady"))?;
        self.resident.remove(&v);
        Ok(v)
    }
}
