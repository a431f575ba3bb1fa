//! Trace-driven simulation with centralized hit detection.
//!
//! For each request the harness finds the resident entry with the highest
//! similarity (or the equal key in exact-key mode) and decides hit or miss;
//! the policy only hears the verdict. Misses are always admitted, each under
//! a fresh entry id equal to the request id.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::events::{EntryId, Event};
use crate::policy::{make_policy, policy_step, Access, Policy, PolicySpec};
use crate::trace::Trace;

/// Slack allowed above 1 for `hr_norm`.
pub const HR_NORM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub capacity: usize,
    pub tau: f64,
    pub exact_keys: bool,
    /// Keep the per-step event log.
    pub record_steps: bool,
    /// Precomputed infinite-cache hit ratio; computed when absent.
    pub hr_full: Option<f64>,
}

impl SimConfig {
    pub fn new(capacity: usize, tau: f64) -> Self {
        Self { capacity, tau, exact_keys: false, record_steps: true, hr_full: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub policy: String,
    pub hits: u64,
    pub misses: u64,
    pub hr: f64,
    pub hr_full: f64,
    pub hr_norm: f64,
    /// Empty unless `record_steps`.
    pub per_step: Vec<Event>,
    /// Digest of the final resident set and counters.
    pub digest: u64,
    pub config_echo: String,
    pub runtime_ms: u128,
}

/// `hr / hr_full`, taken as 1 when the trace has no reuse at all.
pub fn normalized_hr(hr: f64, hr_full: f64) -> f64 {
    if hr_full > 0.0 {
        hr / hr_full
    } else {
        1.0
    }
}

fn fnv1a(acc: u64, x: u64) -> u64 {
    let mut h = acc;
    for b in x.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Digest of a resident set plus hit/miss counters.
pub fn state_digest<'a>(residents: impl IntoIterator<Item = &'a EntryId>, hits: u64, misses: u64) -> u64 {
    let sorted: BTreeSet<EntryId> = residents.into_iter().copied().collect();
    let mut h = 0xcbf2_9ce4_8422_2325;
    h = fnv1a(h, hits);
    h = fnv1a(h, misses);
    for id in sorted {
        h = fnv1a(h, id);
    }
    h
}

/// Rebuilds the final state digest from a step log alone.
pub fn replay_digest(log: &[Event]) -> Result<u64> {
    let mut resident = BTreeSet::new();
    let (mut hits, mut misses) = (0, 0);
    for e in log {
        match *e {
            Event::Insert { id, .. } => {
                if !resident.insert(id) {
                    return Err(Error::validation(format!("INSERT of resident entry {id}")));
                }
            }
            Event::Evict { id, .. } => {
                if !resident.remove(&id) {
                    return Err(Error::validation(format!("EVICT of absent entry {id}")));
                }
            }
            Event::Hit { .. } => hits += 1,
            Event::Miss { .. } => misses += 1,
            Event::Access { .. } | Event::Link { .. } => {}
        }
    }
    Ok(state_digest(&resident, hits, misses))
}

/// Resident embeddings in a dense array for scanning.
struct Residents {
    ids: Vec<EntryId>,
    keys: Vec<u64>,
    embs: Vec<EmbeddingVector>,
    slot: HashMap<EntryId, usize>,
    by_key: HashMap<u64, EntryId>,
}

impl Residents {
    fn new() -> Self {
        Self { ids: vec![], keys: vec![], embs: vec![], slot: HashMap::new(), by_key: HashMap::new() }
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn insert(&mut self, id: EntryId, key: u64, emb: EmbeddingVector) {
        self.slot.insert(id, self.ids.len());
        self.ids.push(id);
        self.keys.push(key);
        self.embs.push(emb);
        self.by_key.insert(key, id);
    }

    fn remove(&mut self, id: EntryId) -> Result<()> {
        let i = self.slot.remove(&id).ok_or_else(|| Error::validation(format!("policy named non-resident victim {id}")))?;
        let key = self.keys[i];
        if self.by_key.get(&key) == Some(&id) {
            self.by_key.remove(&key);
        }
        self.ids.swap_remove(i);
        self.keys.swap_remove(i);
        self.embs.swap_remove(i);
        if i < self.ids.len() {
            self.slot.insert(self.ids[i], i);
        }
        Ok(())
    }

    /// Best `(id, sim)` over all residents or over `subset`; ties go to the
    /// smaller id.
    fn best(&self, q: &EmbeddingVector, subset: Option<&[EntryId]>) -> Option<(EntryId, f64)> {
        let mut best: Option<(EntryId, f64)> = None;
        let mut consider = |id: EntryId, sim: f64| {
            if best.is_none_or(|(bid, bs)| sim > bs || (sim == bs && id < bid)) {
                best = Some((id, sim));
            }
        };
        match subset {
            None => {
                for (i, e) in self.embs.iter().enumerate() {
                    consider(self.ids[i], q.dot(e));
                }
            }
            Some(ids) => {
                for id in ids {
                    if let Some(&i) = self.slot.get(id) {
                        consider(*id, q.dot(&self.embs[i]));
                    }
                }
            }
        }
        best
    }
}

fn check_dims(trace: &Trace) -> Result<()> {
    if let Some(r) = trace.requests.iter().find(|r| r.embedding.dim() != trace.dim) {
        return Err(Error::Config(format!(
            "request {} has dimension {} but the trace declares {}",
            r.id,
            r.embedding.dim(),
            trace.dim
        )));
    }
    Ok(())
}

fn key_of(trace: &Trace, exact: bool, i: usize) -> Result<u64> {
    let r = &trace.requests[i];
    if exact {
        r.exact_key.ok_or_else(|| Error::usage(format!("exact-key mode but request {} has no key", r.id)))
    } else {
        Ok(r.item_key())
    }
}

/// Hit ratio of an unbounded cache (no evictions ever).
pub fn hr_full(trace: &Trace, tau: f64, exact_keys: bool) -> Result<f64> {
    check_dims(trace)?;
    if trace.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    if exact_keys {
        let mut seen = std::collections::HashSet::new();
        for i in 0..trace.len() {
            if !seen.insert(key_of(trace, true, i)?) {
                hits += 1;
            }
        }
    } else {
        let mut stored: Vec<&EmbeddingVector> = Vec::new();
        for r in &trace.requests {
            if stored.iter().any(|e| r.embedding.dot(e) >= tau) {
                hits += 1;
            } else {
                stored.push(&r.embedding);
            }
        }
    }
    Ok(hits as f64 / trace.len() as f64)
}

pub fn run_sim(trace: &Trace, policy: &mut dyn Policy, cfg: &SimConfig) -> Result<SimResult> {
    let started = Instant::now();
    if cfg.capacity == 0 {
        return Err(Error::usage("capacity must be at least 1"));
    }
    if !(cfg.tau > 0.0 && cfg.tau <= 1.0) {
        return Err(Error::usage(format!("tau must lie in (0, 1], got {}", cfg.tau)));
    }
    check_dims(trace)?;
    let full = match cfg.hr_full {
        Some(h) => h,
        None => hr_full(trace, cfg.tau, cfg.exact_keys)?,
    };
    let mut res = Residents::new();
    let mut log = Vec::new();
    let (mut hits, mut misses) = (0u64, 0u64);
    for (i, r) in trace.requests.iter().enumerate() {
        let t = r.t;
        for id in policy.expired(t) {
            res.remove(id)?;
            if cfg.record_steps {
                log.push(Event::Evict { id, t });
            }
        }
        let key = key_of(trace, cfg.exact_keys, i)?;
        let matched = if cfg.exact_keys {
            res.by_key.get(&key).map(|id| (*id, 1.0))
        } else {
            let subset = policy.hit_candidates(&r.embedding, t);
            res.best(&r.embedding, subset.as_deref()).filter(|(_, s)| *s >= cfg.tau)
        };
        let (entry, hit) = match matched {
            Some((id, sim)) => {
                hits += 1;
                if cfg.record_steps {
                    log.push(Event::Hit { id, t, sim });
                }
                (id, true)
            }
            None => {
                misses += 1;
                res.insert(r.id, key, r.embedding.clone());
                if cfg.record_steps {
                    log.push(Event::Miss { t });
                    log.push(Event::Insert { id: r.id, t });
                }
                (r.id, false)
            }
        };
        if cfg.record_steps {
            log.push(Event::Access { id: entry, t });
        }
        let access = Access { entry, key, embedding: &r.embedding, t };
        let victim = policy_step(policy, &access, hit, cfg.capacity)?;
        let links = policy.drain_events();
        if cfg.record_steps {
            log.extend(links);
        }
        if let Some(v) = victim {
            res.remove(v)?;
            if cfg.record_steps {
                log.push(Event::Evict { id: v, t });
            }
        }
        if res.len() > cfg.capacity {
            return Err(Error::validation(format!("{} left {} residents above capacity {}", policy.name(), res.len(), cfg.capacity)));
        }
        if res.len() != policy.len() {
            return Err(Error::validation(format!(
                "{} tracks {} entries but {} are resident at step {t}",
                policy.name(),
                policy.len(),
                res.len()
            )));
        }
    }
    let n = trace.len() as f64;
    let hr = if n > 0.0 { hits as f64 / n } else { 0.0 };
    Ok(SimResult {
        policy: policy.name().to_string(),
        hits,
        misses,
        hr,
        hr_full: full,
        hr_norm: normalized_hr(hr, full),
        per_step: log,
        digest: state_digest(&res.ids, hits, misses),
        config_echo: format!(
            "capacity={} tau={} exact_keys={} policy={}",
            cfg.capacity,
            cfg.tau,
            cfg.exact_keys,
            policy.describe()
        ),
        runtime_ms: started.elapsed().as_millis(),
    })
}

/// Builds the named policy and runs it.
pub fn run_named(trace: &Trace, name: &str, spec: &PolicySpec<'_>, cfg: &SimConfig) -> Result<SimResult> {
    let mut spec = spec.clone();
    spec.capacity = cfg.capacity;
    if name == "belady" {
        spec.trace = Some(trace);
    }
    let mut p = make_policy(name, &spec)?;
    run_sim(trace, p.as_mut(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Request;

    fn axis(d: usize, i: usize) -> EmbeddingVector {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        EmbeddingVector::new(v).unwrap()
    }

    fn trace_of(idx: &[usize], d: usize) -> Trace {
        let reqs = idx
            .iter()
            .enumerate()
            .map(|(i, k)| Request {
                id: i as u64 + 1,
                t: i as u64 + 1,
                embedding: axis(d, *k),
                topic_truth: None,
                parent_truth: None,
                exact_key: Some(*k as u64),
            })
            .collect();
        Trace::new(d, reqs).unwrap()
    }

    #[test]
    fn infinite_cache_examples() {
        assert_eq!(hr_full(&trace_of(&[0, 1, 2], 4), 0.85, false).unwrap(), 0.0);
        assert_eq!(hr_full(&trace_of(&[0, 0], 4), 0.85, false).unwrap(), 0.5);
        assert_eq!(hr_full(&trace_of(&[0, 0], 4), 0.85, true).unwrap(), 0.5);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalized_hr(0.3, 0.6), 0.5);
        assert_eq!(normalized_hr(0.0, 0.0), 1.0);
        let t = trace_of(&[0, 1, 0, 2, 1, 0], 4);
        let r = run_named(&t, "lru", &PolicySpec::new(t.len()), &SimConfig::new(t.len(), 0.85)).unwrap();
        assert!((r.hr_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conservation_and_replay() {
        let t = trace_of(&[0, 1, 2, 0, 3, 1, 0, 2, 2, 3], 4);
        for name in crate::policy::POLICY_NAMES {
            let r = run_named(&t, name, &PolicySpec::new(2), &SimConfig::new(2, 0.85)).unwrap();
            assert_eq!(r.hits + r.misses, 10, "{name}");
            assert_eq!(replay_digest(&r.per_step).unwrap(), r.digest, "{name}");
        }
    }

    #[test]
    fn zero_capacity_rejected() {
        let t = trace_of(&[0], 4);
        assert!(run_named(&t, "lru", &PolicySpec::new(1), &SimConfig::new(0, 0.85)).is_err());
    }
}
