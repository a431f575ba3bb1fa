//! Topic routing over anchor-based representatives.
//!
//! Each live topic keeps its resident members and a representative equal to
//! the embedding of one member, the anchor (the TSI-max member at the time it
//! was chosen). Evicting the anchor leaves the topic stale; the anchor is
//! recomputed lazily the next time the topic is routed to, valued or grown.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::embedding::EmbeddingVector;
use crate::entry::TopicId;
use crate::error::{Error, Result};
use crate::events::EntryId;
use crate::tp::{TpConfig, TpState};
use crate::tsi::TsiTracker;

/// What topic maintenance needs to know about members.
pub trait MemberInfo {
    fn tsi(&self, id: EntryId) -> f64;
    fn last_access(&self, id: EntryId) -> u64;
    fn embedding(&self, id: EntryId) -> &EmbeddingVector;
}

/// [`TsiTracker`] viewed with a fixed `lambda`.
pub struct TrackerMembers<'a> {
    pub tracker: &'a TsiTracker,
    pub lambda: f64,
}

impl MemberInfo for TrackerMembers<'_> {
    fn tsi(&self, id: EntryId) -> f64 {
        self.tracker.get(id).map_or(0.0, |e| e.tsi(self.lambda))
    }
    fn last_access(&self, id: EntryId) -> u64 {
        self.tracker.get(id).map_or(0, |e| e.last_access)
    }
    fn embedding(&self, id: EntryId) -> &EmbeddingVector {
        &self.tracker.get(id).expect("member is resident").embedding
    }
}

/// Nearest-representative lookup. The linear scan is exact; an approximate
/// index can stand in as long as it returns up to `k` candidates.
pub trait RepresentativeIndex {
    /// Up to `k` topics, most similar first (ties by smaller id).
    fn nearest(&self, query: &EmbeddingVector, k: usize) -> Vec<(TopicId, f64)>;
    fn upsert(&mut self, topic: TopicId, rep: EmbeddingVector);
    fn remove(&mut self, topic: TopicId);
}

#[derive(Debug, Clone, Default)]
pub struct LinearScanIndex {
    reps: BTreeMap<TopicId, EmbeddingVector>,
}

fn by_sim_then_id(a: &(TopicId, f64), b: &(TopicId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl RepresentativeIndex for LinearScanIndex {
    fn nearest(&self, query: &EmbeddingVector, k: usize) -> Vec<(TopicId, f64)> {
        let mut all: Vec<(TopicId, f64)> = self.reps.iter().map(|(id, r)| (*id, query.dot(r))).collect();
        if k < all.len() {
            all.select_nth_unstable_by(k, by_sim_then_id);
            all.truncate(k);
        }
        all.sort_by(by_sim_then_id);
        all
    }

    fn upsert(&mut self, topic: TopicId, rep: EmbeddingVector) {
        self.reps.insert(topic, rep);
    }

    fn remove(&mut self, topic: TopicId) {
        self.reps.remove(&topic);
    }
}

#[derive(Debug, Clone)]
pub struct TopicState {
    pub topic_id: TopicId,
    pub members: Vec<EntryId>,
    pub rep: EmbeddingVector,
    /// `None` while stale.
    pub anchor: Option<EntryId>,
    pub tp: TpState,
}

impl TopicState {
    pub fn is_stale(&self) -> bool {
        self.anchor.is_none()
    }
}

/// Prevalence history of a topic whose members were all evicted.
#[derive(Debug, Clone)]
struct Retired {
    rep: EmbeddingVector,
    tp: TpState,
}

#[derive(Debug, Clone)]
pub struct TopicIndex<I = LinearScanIndex> {
    topics: BTreeMap<TopicId, TopicState>,
    index: I,
    next_topic_id: TopicId,
    retired: BTreeMap<TopicId, Retired>,
    /// When set, a new topic whose creating query matches a retired topic's
    /// last representative (sim >= the routing gate) inherits its TP scalars.
    pub inherit_tp: bool,
    /// Upper bound on retained histories; the oldest are dropped first.
    pub retired_limit: usize,
}

impl Default for TopicIndex {
    fn default() -> Self {
        Self::new()
    }
}

impl TopicIndex {
    pub fn new() -> Self {
        Self::with_index(LinearScanIndex::default())
    }
}

impl<I: RepresentativeIndex> TopicIndex<I> {
    pub fn with_index(index: I) -> Self {
        Self {
            topics: BTreeMap::new(),
            index,
            next_topic_id: 1,
            retired: BTreeMap::new(),
            inherit_tp: true,
            retired_limit: usize::MAX,
        }
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn get(&self, s: TopicId) -> Option<&TopicState> {
        self.topics.get(&s)
    }

    pub fn topics(&self) -> impl Iterator<Item = &TopicState> {
        self.topics.values()
    }

    fn state_mut(&mut self, s: TopicId) -> Result<&mut TopicState> {
        self.topics.get_mut(&s).ok_or_else(|| Error::usage(format!("topic {s} is not in the index")))
    }

    /// Gated routing over a shortlist of the `k` nearest representatives.
    /// Stale shortlisted topics are refreshed before they are compared.
    pub fn route_topic(
        &mut self,
        query: &EmbeddingVector,
        tau: f64,
        k: usize,
        members: &impl MemberInfo,
    ) -> Option<TopicId> {
        let shortlist = self.index.nearest(query, k);
        let mut best: Option<(TopicId, f64)> = None;
        for (s, mut sim) in shortlist {
            if self.topics[&s].is_stale() {
                self.refresh_topic(s, members).expect("shortlisted topic is live");
                sim = query.dot(&self.topics[&s].rep);
            }
            if sim < tau {
                continue;
            }
            if best.is_none_or(|b| by_sim_then_id(&(s, sim), &b) == Ordering::Less) {
                best = Some((s, sim));
            }
        }
        best.map(|(s, _)| s)
    }

    /// Opens a topic holding `entry` as its sole member and anchor, and
    /// counts the creating request as the topic's first hit.
    pub fn create_topic(
        &mut self,
        embedding: &EmbeddingVector,
        entry: EntryId,
        t: u64,
        tp_cfg: &TpConfig,
        route_tau: f64,
    ) -> Result<TopicId> {
        let s = self.next_topic_id;
        self.next_topic_id += 1;
        let prior = if self.inherit_tp { self.take_retired(embedding, route_tau) } else { None };
        let tp = prior.unwrap_or_default().on_hit(t, tp_cfg)?;
        self.topics.insert(
            s,
            TopicState { topic_id: s, members: vec![entry], rep: embedding.clone(), anchor: Some(entry), tp },
        );
        self.index.upsert(s, embedding.clone());
        Ok(s)
    }

    fn take_retired(&mut self, embedding: &EmbeddingVector, tau: f64) -> Option<TpState> {
        let mut best: Option<(TopicId, f64)> = None;
        for (id, r) in &self.retired {
            let sim = embedding.dot(&r.rep);
            if sim >= tau && best.is_none_or(|b| by_sim_then_id(&(*id, sim), &b) == Ordering::Less) {
                best = Some((*id, sim));
            }
        }
        best.and_then(|(id, _)| self.retired.remove(&id)).map(|r| r.tp)
    }

    /// Refresh-on-hit for the topic's prevalence.
    pub fn record_hit(&mut self, s: TopicId, t: u64, tp_cfg: &TpConfig) -> Result<()> {
        let st = self.state_mut(s)?;
        st.tp = st.tp.on_hit(t, tp_cfg)?;
        Ok(())
    }

    pub fn on_insert_member(&mut self, s: TopicId, entry: EntryId, members: &impl MemberInfo) -> Result<()> {
        if self.state_mut(s)?.is_stale() {
            self.refresh_topic(s, members)?;
        }
        let st = self.state_mut(s)?;
        st.members.push(entry);
        let take = match st.anchor {
            None => true,
            Some(a) => members.tsi(entry) > members.tsi(a),
        };
        if take {
            st.anchor = Some(entry);
            st.rep = members.embedding(entry).clone();
            let rep = st.rep.clone();
            self.index.upsert(s, rep);
        }
        Ok(())
    }

    /// Removes `entry`; deletes the topic when it empties. Returns true if the
    /// topic was deleted.
    pub fn on_evict_member(&mut self, s: TopicId, entry: EntryId) -> Result<bool> {
        let st = self.state_mut(s)?;
        let pos = st
            .members
            .iter()
            .position(|m| *m == entry)
            .ok_or_else(|| Error::usage(format!("entry {entry} is not a member of topic {s}")))?;
        st.members.remove(pos);
        if st.members.is_empty() {
            let st = self.topics.remove(&s).expect("present");
            self.index.remove(s);
            self.retired.insert(s, Retired { rep: st.rep, tp: st.tp });
            while self.retired.len() > self.retired_limit {
                self.retired.pop_first();
            }
            return Ok(true);
        }
        if st.anchor == Some(entry) {
            st.anchor = None;
        }
        Ok(false)
    }

    /// Re-elects a stale anchor: the TSI-max member, ties to the more recent
    /// access, then the smaller id. No-op when the anchor is valid.
    pub fn refresh_topic(&mut self, s: TopicId, members: &impl MemberInfo) -> Result<()> {
        let st = self.state_mut(s)?;
        if st.anchor.is_some() {
            return Ok(());
        }
        let anchor = *st
            .members
            .iter()
            .max_by(|a, b| {
                members
                    .tsi(**a)
                    .total_cmp(&members.tsi(**b))
                    .then(members.last_access(**a).cmp(&members.last_access(**b)))
                    .then(b.cmp(a))
            })
            .expect("live topics are nonempty");
        st.anchor = Some(anchor);
        st.rep = members.embedding(anchor).clone();
        let rep = st.rep.clone();
        self.index.upsert(s, rep);
        Ok(())
    }

    /// Refreshes every stale topic.
    pub fn refresh_all(&mut self, members: &impl MemberInfo) {
        let stale: Vec<TopicId> = self.topics.values().filter(|t| t.is_stale()).map(|t| t.topic_id).collect();
        for s in stale {
            self.refresh_topic(s, members).expect("live");
        }
    }

    pub fn retired_tp(&self, s: TopicId) -> Option<TpState> {
        self.retired.get(&s).map(|r| r.tp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[derive(Default)]
    struct Fake {
        m: HashMap<EntryId, (f64, u64, EmbeddingVector)>,
    }

    impl MemberInfo for Fake {
        fn tsi(&self, id: EntryId) -> f64 {
            self.m[&id].0
        }
        fn last_access(&self, id: EntryId) -> u64 {
            self.m[&id].1
        }
        fn embedding(&self, id: EntryId) -> &EmbeddingVector {
            &self.m[&id].2
        }
    }

    fn axis(d: usize, i: usize) -> EmbeddingVector {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        EmbeddingVector::new(v).unwrap()
    }

    fn mix(sim: f64) -> EmbeddingVector {
        EmbeddingVector::new(vec![sim, (1.0 - sim * sim).sqrt(), 0.0, 0.0]).unwrap()
    }

    const TP: TpConfig = TpConfig { alpha: 0.1 };

    #[test]
    fn empty_index_routes_nowhere() {
        let mut ix = TopicIndex::new();
        assert_eq!(ix.route_topic(&axis(4, 0), 0.85, 8, &Fake::default()), None);
    }

    #[test]
    fn gate_is_inclusive() {
        let mut ix = TopicIndex::new();
        let mut f = Fake::default();
        let q = mix(0.85);
        f.m.insert(1, (1.0, 1, axis(4, 0)));
        let s = ix.create_topic(&axis(4, 0), 1, 1, &TP, 0.85).unwrap();
        let tau = q.dot(&axis(4, 0));
        assert_eq!(ix.route_topic(&q, tau, 8, &f), Some(s));
        assert_eq!(ix.route_topic(&q, tau + 1e-12, 8, &f), None);
    }

    #[test]
    fn creation_examples() {
        let mut ix = TopicIndex::new();
        let a = axis(4, 0);
        let s1 = ix.create_topic(&a, 1, 1, &TP, 0.85).unwrap();
        assert_eq!(s1, 1);
        let st = ix.get(s1).unwrap();
        assert_eq!(st.members, vec![1]);
        assert_eq!(st.rep, a);
        assert_eq!(st.tp, TpState { t_last: 1, tp_last: 1.0 });
        let mut f = Fake::default();
        f.m.insert(1, (1.0, 1, a));
        let b = axis(4, 1);
        assert_eq!(ix.route_topic(&b, 0.85, 8, &f), None);
        let s2 = ix.create_topic(&b, 2, 2, &TP, 0.85).unwrap();
        assert_ne!(s1, s2);
    }

    #[test]
    fn insert_and_anchor_rules() {
        let mut ix = TopicIndex::new();
        let mut f = Fake::default();
        f.m.insert(1, (2.0, 1, axis(4, 0)));
        f.m.insert(2, (2.0, 2, axis(4, 1)));
        f.m.insert(3, (5.0, 3, axis(4, 2)));
        let s = ix.create_topic(&axis(4, 0), 1, 1, &TP, 0.85).unwrap();
        ix.on_insert_member(s, 2, &f).unwrap();
        assert_eq!(ix.get(s).unwrap().anchor, Some(1), "equal TSI keeps the anchor");
        ix.on_insert_member(s, 3, &f).unwrap();
        assert_eq!(ix.get(s).unwrap().anchor, Some(3));
        assert_eq!(ix.get(s).unwrap().rep, axis(4, 2));
    }

    #[test]
    fn evict_rules() {
        let mut ix = TopicIndex::new();
        let mut f = Fake::default();
        f.m.insert(1, (1.0, 1, axis(4, 0)));
        f.m.insert(2, (4.0, 2, axis(4, 1)));
        f.m.insert(3, (2.0, 3, axis(4, 2)));
        f.m.insert(4, (1.0, 4, axis(4, 3)));
        let s = ix.create_topic(&axis(4, 0), 1, 1, &TP, 0.85).unwrap();
        for id in [2, 3, 4] {
            ix.on_insert_member(s, id, &f).unwrap();
        }
        assert_eq!(ix.get(s).unwrap().anchor, Some(2));
        // Non-anchor eviction leaves rep alone.
        ix.on_evict_member(s, 4).unwrap();
        assert_eq!(ix.get(s).unwrap().rep, axis(4, 1));
        assert!(ix.on_evict_member(s, 99).is_err());
        // Anchor eviction leaves the topic stale.
        ix.on_evict_member(s, 2).unwrap();
        assert!(ix.get(s).unwrap().is_stale());
        ix.refresh_topic(s, &f).unwrap();
        assert_eq!(ix.get(s).unwrap().anchor, Some(3));
        let once = ix.get(s).unwrap().clone();
        ix.refresh_topic(s, &f).unwrap();
        assert_eq!(ix.get(s).unwrap().anchor, once.anchor);
        assert_eq!(ix.get(s).unwrap().rep, once.rep);
        // Sole member out: topic removed and never reused.
        ix.on_evict_member(s, 1).unwrap();
        assert!(ix.on_evict_member(s, 3).unwrap());
        assert!(ix.get(s).is_none());
        assert!(ix.refresh_topic(s, &f).is_err());
        assert!(ix.retired_tp(s).is_some());
        let s2 = ix.create_topic(&axis(4, 3), 9, 9, &TP, 0.85).unwrap();
        assert!(s2 > s);
    }

    #[test]
    fn refresh_picks_tsi_max() {
        let mut ix = TopicIndex::new();
        let mut f = Fake::default();
        f.m.insert(1, (1.0, 1, axis(4, 0)));
        f.m.insert(2, (4.0, 2, axis(4, 1)));
        f.m.insert(3, (2.0, 3, axis(4, 2)));
        f.m.insert(9, (9.0, 1, axis(4, 3)));
        let s = ix.create_topic(&axis(4, 3), 9, 1, &TP, 0.85).unwrap();
        for id in [1, 2, 3] {
            ix.on_insert_member(s, id, &f).unwrap();
        }
        ix.on_evict_member(s, 9).unwrap();
        ix.refresh_topic(s, &f).unwrap();
        assert_eq!(ix.get(s).unwrap().anchor, Some(2));
    }

    #[test]
    fn recreated_topic_inherits_prevalence() {
        let mut ix = TopicIndex::new();
        let cfg = TpConfig { alpha: 0.0 };
        let s = ix.create_topic(&axis(4, 0), 1, 1, &cfg, 0.85).unwrap();
        ix.record_hit(s, 2, &cfg).unwrap();
        ix.on_evict_member(s, 1).unwrap();
        let s2 = ix.create_topic(&axis(4, 0), 2, 5, &cfg, 0.85).unwrap();
        assert_eq!(ix.get(s2).unwrap().tp.tp_last, 3.0);
        ix.on_evict_member(s2, 2).unwrap();
        ix.inherit_tp = false;
        let s3 = ix.create_topic(&axis(4, 0), 3, 6, &cfg, 0.85).unwrap();
        assert_eq!(ix.get(s3).unwrap().tp.tp_last, 1.0);
    }
}
