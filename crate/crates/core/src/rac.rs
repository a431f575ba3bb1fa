//! The relation-aware policy: topic routing with prevalence refresh, TSI
//! maintenance, and eviction of the entry with the smallest
//! `TP(topic) * TSI(entry)`.

use crate::embedding::EmbeddingVector;
use crate::entry::{CacheEntry, TopicId};
use crate::error::{Error, Result};
use crate::events::{EntryId, Event};
use crate::policy::{empty_victim, not_resident, Access, Policy};
use crate::rank::{structural_rank, RankConfig};
use crate::topics::{TopicIndex, TrackerMembers};
use crate::tp::TpConfig;
use crate::tsi::{DependencyDag, TsiConfig, TsiTracker};

/// Which factors enter the eviction value. Ablations pin the removed factor
/// to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RacVariant {
    #[default]
    Full,
    NoTp,
    NoTsi,
}

impl RacVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::NoTp => "no-tp",
            Self::NoTsi => "no-tsi",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "no-tp" => Ok(Self::NoTp),
            "no-tsi" => Ok(Self::NoTsi),
            other => Err(Error::usage(format!("unknown RAC variant '{other}' (full|no-tp|no-tsi)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RacConfig {
    pub capacity: usize,
    /// Hit threshold, and the routing gate unless `route_tau` overrides it.
    pub tau: f64,
    pub route_tau: Option<f64>,
    pub tp: TpConfig,
    pub tsi: TsiConfig,
    pub shortlist_k: usize,
    pub use_structural_rank: bool,
    pub rank: RankConfig,
    pub variant: RacVariant,
    /// Restrict the harness's hit scan to the routed topic's members.
    pub routed_hits_only: bool,
    /// Let re-created topics pick up a retired topic's prevalence.
    pub inherit_tp: bool,
}

impl RacConfig {
    /// Defaults: tau 0.85, alpha 1/C, tau_edge 0.6, lambda 1, T 64, K 8.
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            tau: 0.85,
            route_tau: None,
            tp: TpConfig::for_capacity(capacity),
            tsi: TsiConfig::default(),
            shortlist_k: 8,
            use_structural_rank: false,
            rank: RankConfig { tol: 1e-10, ..RankConfig::default() },
            variant: RacVariant::Full,
            routed_hits_only: false,
            inherit_tp: true,
        }
    }

    pub fn route_tau(&self) -> f64 {
        self.route_tau.unwrap_or(self.tau)
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::usage("capacity must be at least 1"));
        }
        for (name, v) in [("tau", self.tau), ("route tau", self.route_tau())] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::usage(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if self.shortlist_k == 0 {
            return Err(Error::usage("shortlist size K must be at least 1"));
        }
        TpConfig::new(self.tp.alpha)?;
        self.tsi.validate()
    }

    pub fn describe(&self) -> String {
        format!(
            "rac(variant={},tau={},route_tau={},alpha={},lambda={},tau_edge={},T={},K={},structural_rank={},routed_hits_only={},inherit_tp={})",
            self.variant.as_str(),
            self.tau,
            self.route_tau(),
            self.tp.alpha,
            self.tsi.lambda,
            self.tsi.tau_edge,
            self.tsi.lookback,
            self.shortlist_k,
            self.use_structural_rank,
            self.routed_hits_only,
            self.inherit_tp
        )
    }
}

/// What happened on one arrival.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArrivalRecord {
    pub hit: bool,
    pub topic: TopicId,
    pub inserted: Option<EntryId>,
    pub evicted: Vec<EntryId>,
}

#[derive(Debug)]
pub struct Rac {
    cfg: RacConfig,
    tracker: TsiTracker,
    topics: TopicIndex,
    next_entry: EntryId,
}

impl Rac {
    pub fn new(cfg: RacConfig) -> Result<Self> {
        cfg.validate()?;
        let mut topics = TopicIndex::new();
        topics.inherit_tp = cfg.inherit_tp;
        Ok(Self { cfg, tracker: TsiTracker::with_log(), topics, next_entry: 1 })
    }

    pub fn config(&self) -> &RacConfig {
        &self.cfg
    }

    pub fn tracker(&self) -> &TsiTracker {
        &self.tracker
    }

    pub fn topics(&self) -> &TopicIndex {
        &self.topics
    }

    fn split(&mut self) -> (&mut TopicIndex, TrackerMembers<'_>) {
        (&mut self.topics, TrackerMembers { tracker: &self.tracker, lambda: self.cfg.tsi.lambda })
    }

    /// Routes an embedding under the routing gate (refreshing stale
    /// shortlisted topics as a side effect).
    pub fn route(&mut self, embedding: &EmbeddingVector) -> Option<TopicId> {
        let (tau, k) = (self.cfg.route_tau(), self.cfg.shortlist_k);
        let (topics, members) = self.split();
        topics.route_topic(embedding, tau, k, &members)
    }

    fn hit(&mut self, entry: EntryId, t: u64) -> Result<TopicId> {
        let s = self.tracker.get(entry).ok_or_else(|| not_resident("rac", entry))?.topic;
        self.topics.record_hit(s, t, &self.cfg.tp)?;
        self.tracker.update_tsi(entry, t, &self.cfg.tsi)?;
        Ok(s)
    }

    fn insert(&mut self, entry: EntryId, key: u64, embedding: &EmbeddingVector, t: u64) -> Result<TopicId> {
        let routed = self.route(embedding);
        if let Some(s) = routed {
            self.topics.record_hit(s, t, &self.cfg.tp)?;
        }
        let mut e = CacheEntry::new(entry, key, embedding.clone(), t);
        e.topic = routed.unwrap_or(0);
        self.tracker.insert(e)?;
        self.tracker.update_tsi(entry, t, &self.cfg.tsi)?;
        let s = match routed {
            Some(s) => {
                let (topics, members) = self.split();
                topics.on_insert_member(s, entry, &members)?;
                s
            }
            None => {
                let s = self.topics.create_topic(embedding, entry, t, &self.cfg.tp, self.cfg.route_tau())?;
                self.tracker.get_mut(entry).expect("just inserted").topic = s;
                s
            }
        };
        Ok(s)
    }

    fn rank_multipliers(&self) -> Result<std::collections::HashMap<EntryId, f64>> {
        let mut ids: Vec<&CacheEntry> = self.tracker.residents().collect();
        ids.sort_by_key(|e| (e.insert_time, e.entry_id));
        let mut dag = DependencyDag::new();
        for e in &ids {
            dag.add_node(e.entry_id, e.freq)?;
        }
        for e in &ids {
            if let Some(p) = e.parent.filter(|p| self.tracker.contains(*p)) {
                dag.add_edge(p, e.entry_id)?;
            }
        }
        let r = structural_rank(&dag, &self.cfg.rank)?;
        let max = r.values().copied().fold(0.0, f64::max);
        Ok(r.into_iter().map(|(id, v)| (id, 1.0 + v / max)).collect())
    }

    /// Current eviction value of every resident, in entry-id order.
    pub fn values(&self, t: u64) -> Result<Vec<(EntryId, f64)>> {
        let ranks = if self.cfg.use_structural_rank && !self.tracker.is_empty() {
            Some(self.rank_multipliers()?)
        } else {
            None
        };
        let mut out = Vec::with_capacity(self.tracker.len());
        for e in self.tracker.residents() {
            let tp = match self.cfg.variant {
                RacVariant::NoTp => 1.0,
                _ => {
                    let st = self.topics.get(e.topic).expect("resident entries belong to live topics");
                    st.tp.value(t, &self.cfg.tp)?
                }
            };
            let tsi = match self.cfg.variant {
                RacVariant::NoTsi => 1.0,
                _ => e.tsi(self.cfg.tsi.lambda),
            };
            let m = ranks.as_ref().map_or(1.0, |r| r[&e.entry_id]);
            out.push((e.entry_id, tp * tsi * m));
        }
        out.sort_by_key(|(id, _)| *id);
        Ok(out)
    }

    fn evict_min(&mut self, t: u64) -> Result<EntryId> {
        if self.tracker.is_empty() {
            return Err(empty_victim("rac"));
        }
        {
            let (topics, members) = self.split();
            topics.refresh_all(&members);
        }
        let values = self.values(t)?;
        let (victim, _) = values
            .iter()
            .min_by(|(ia, va), (ib, vb)| {
                let la = self.tracker.get(*ia).expect("resident").last_access;
                let lb = self.tracker.get(*ib).expect("resident").last_access;
                va.total_cmp(vb).then(la.cmp(&lb)).then(ia.cmp(ib))
            })
            .copied()
            .expect("nonempty");
        let e = self.tracker.evict(victim, t)?;
        self.topics.on_evict_member(e.topic, victim)?;
        Ok(victim)
    }

    /// Standalone arrival for driving the policy without the simulator.
    /// `hit` names the entry the caller matched, if any.
    pub fn on_arrive(&mut self, embedding: &EmbeddingVector, key: u64, hit: Option<EntryId>, t: u64) -> Result<ArrivalRecord> {
        match hit {
            Some(id) => Ok(ArrivalRecord { hit: true, topic: self.hit(id, t)?, inserted: None, evicted: vec![] }),
            None => {
                let id = self.next_entry;
                self.next_entry += 1;
                let topic = self.insert(id, key, embedding, t)?;
                let mut evicted = Vec::new();
                while self.tracker.len() > self.cfg.capacity {
                    evicted.push(self.evict_min(t)?);
                }
                Ok(ArrivalRecord { hit: false, topic, inserted: Some(id), evicted })
            }
        }
    }
}

impl Policy for Rac {
    fn name(&self) -> &'static str {
        "rac"
    }

    fn describe(&self) -> String {
        self.cfg.describe()
    }

    fn len(&self) -> usize {
        self.tracker.len()
    }

    fn on_hit(&mut self, a: &Access<'_>) -> Result<()> {
        self.hit(a.entry, a.t).map(|_| ())
    }

    fn on_miss_insert(&mut self, a: &Access<'_>) -> Result<()> {
        self.next_entry = self.next_entry.max(a.entry + 1);
        self.insert(a.entry, a.key, a.embedding, a.t).map(|_| ())
    }

    fn choose_victim(&mut self, t: u64) -> Result<EntryId> {
        self.evict_min(t)
    }

    fn hit_candidates(&mut self, embedding: &EmbeddingVector, _t: u64) -> Option<Vec<EntryId>> {
        if !self.cfg.routed_hits_only {
            return None;
        }
        Some(match self.route(embedding) {
            Some(s) => self.topics.get(s).map(|st| st.members.clone()).unwrap_or_default(),
            None => Vec::new(),
        })
    }

    fn drain_events(&mut self) -> Vec<Event> {
        self.tracker.take_log().into_iter().filter(|e| matches!(e, Event::Link { .. })).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(d: usize, i: usize) -> EmbeddingVector {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        EmbeddingVector::new(v).unwrap()
    }

    #[test]
    fn below_capacity_miss_inserts_without_eviction() {
        let mut r = Rac::new(RacConfig::new(4)).unwrap();
        let rec = r.on_arrive(&axis(4, 0), 1, None, 1).unwrap();
        assert!(!rec.hit && rec.inserted == Some(1) && rec.evicted.is_empty());
    }

    #[test]
    fn evicts_the_smallest_value() {
        let mut cfg = RacConfig::new(2);
        cfg.tp = TpConfig { alpha: 0.0 };
        let mut r = Rac::new(cfg).unwrap();
        r.on_arrive(&axis(4, 0), 1, None, 1).unwrap();
        r.on_arrive(&axis(4, 0), 1, Some(1), 2).unwrap();
        r.on_arrive(&axis(4, 0), 1, Some(1), 3).unwrap();
        r.on_arrive(&axis(4, 1), 2, None, 4).unwrap();
        // entry 1: TP 3 * TSI 3 = 9; entry 2: 1 * 1.
        assert_eq!(r.values(4).unwrap(), vec![(1, 9.0), (2, 1.0)]);
        let rec = r.on_arrive(&axis(4, 2), 3, None, 5).unwrap();
        // The newcomer ties with entry 2 at value 1 and is more recent.
        assert_eq!(rec.evicted, vec![2]);
        assert!(r.tracker().len() <= 2);
    }

    #[test]
    fn capacity_one_holds_newest_or_best() {
        let mut r = Rac::new(RacConfig::new(1)).unwrap();
        for t in 1..=5 {
            r.on_arrive(&axis(8, t as usize), t, None, t).unwrap();
            assert_eq!(r.tracker().len(), 1);
        }
    }

    #[test]
    fn ablations_pin_a_factor() {
        let mut cfg = RacConfig::new(8);
        cfg.tp = TpConfig { alpha: 0.0 };
        for (variant, want) in [(RacVariant::Full, 4.0), (RacVariant::NoTp, 2.0), (RacVariant::NoTsi, 2.0)] {
            cfg.variant = variant;
            let mut r = Rac::new(cfg.clone()).unwrap();
            r.on_arrive(&axis(4, 0), 1, None, 1).unwrap();
            r.on_arrive(&axis(4, 0), 1, Some(1), 2).unwrap();
            assert_eq!(r.values(2).unwrap()[0].1, want, "{variant:?}");
        }
    }

    #[test]
    fn common_tp_scaling_keeps_argmin() {
        // Doubling alpha's effect aside, multiplying every value by one
        // positive constant cannot move the minimum.
        let mut r = Rac::new(RacConfig::new(16)).unwrap();
        for t in 1..=10u64 {
            r.on_arrive(&axis(16, (t % 5) as usize), t, None, t).unwrap();
        }
        let v = r.values(10).unwrap();
        let argmin = |xs: &[(EntryId, f64)]| xs.iter().min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))).unwrap().0;
        let scaled: Vec<_> = v.iter().map(|(i, x)| (*i, x * 3.7)).collect();
        assert_eq!(argmin(&v), argmin(&scaled));
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = RacConfig::new(0);
        assert!(Rac::new(c.clone()).is_err());
        c.capacity = 1;
        c.tau = 0.0;
        assert!(Rac::new(c.clone()).is_err());
        c.tau = 0.9;
        c.route_tau = Some(1.5);
        assert!(Rac::new(c).is_err());
    }
}
