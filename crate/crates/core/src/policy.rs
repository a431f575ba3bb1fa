//! The uniform eviction-policy interface and the by-name factory.
//!
//! Hit detection lives in the simulator; a policy only hears the verdict.
//! On a miss the harness announces the insertion first and asks for a victim
//! only while the cache is over capacity, so a policy may name the new entry
//! itself (admission by rejection) or an entry it decided on at insert time.

use crate::baselines::{
    arc::ArcCache, belady::{Belady, BeladyMode}, clock::Clock, fifo::Fifo, lecar::LeCaR, lhd::Lhd, lru::Lru,
    s3fifo::S3Fifo, sieve::Sieve, tinylfu::TinyLfu, ttl::Ttl, two_q::TwoQ,
};
use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::events::{EntryId, Event};
use crate::rac::{Rac, RacConfig};
use crate::trace::Trace;

/// One access as seen by a policy.
#[derive(Debug, Clone, Copy)]
pub struct Access<'a> {
    pub entry: EntryId,
    /// Item identity for ghost lists and sketches (exact key, else request id).
    pub key: u64,
    pub embedding: &'a EmbeddingVector,
    pub t: u64,
}

pub trait Policy: Send {
    fn name(&self) -> &'static str;

    /// Effective configuration, echoed into run reports.
    fn describe(&self) -> String {
        self.name().to_string()
    }

    /// Number of entries the policy currently tracks as resident.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn on_hit(&mut self, access: &Access<'_>) -> Result<()>;

    fn on_miss_insert(&mut self, access: &Access<'_>) -> Result<()>;

    /// Names and forgets one resident entry.
    fn choose_victim(&mut self, t: u64) -> Result<EntryId>;

    /// Entries that lapse before step `t` is served (TTL-style expiry).
    fn expired(&mut self, _t: u64) -> Vec<EntryId> {
        Vec::new()
    }

    /// Optional restriction of the harness's hit scan to a subset of residents.
    fn hit_candidates(&mut self, _embedding: &EmbeddingVector, _t: u64) -> Option<Vec<EntryId>> {
        None
    }

    /// Internal events (dependency links) produced since the last drain.
    fn drain_events(&mut self) -> Vec<Event> {
        Vec::new()
    }
}

/// Delivers one verdict to `policy`; on an over-capacity insert returns the
/// single victim.
pub fn policy_step(
    policy: &mut dyn Policy,
    access: &Access<'_>,
    hit: bool,
    capacity: usize,
) -> Result<Option<EntryId>> {
    if hit {
        policy.on_hit(access)?;
        return Ok(None);
    }
    policy.on_miss_insert(access)?;
    if policy.len() > capacity {
        Ok(Some(policy.choose_victim(access.t)?))
    } else {
        Ok(None)
    }
}

pub(crate) fn empty_victim(name: &str) -> Error {
    Error::usage(format!("{name}: choose_victim on an empty cache"))
}

pub(crate) fn not_resident(name: &str, id: EntryId) -> Error {
    Error::usage(format!("{name}: entry {id} is not resident"))
}

pub const POLICY_NAMES: [&str; 13] =
    ["fifo", "lru", "clock", "ttl", "2q", "arc", "tinylfu", "s3fifo", "sieve", "lhd", "lecar", "rac", "belady"];

/// Everything a policy may need at construction time.
#[derive(Debug, Clone)]
pub struct PolicySpec<'a> {
    pub capacity: usize,
    pub seed: u64,
    pub rac: RacConfig,
    /// Required by the offline oracle.
    pub trace: Option<&'a Trace>,
    pub belady_mode: BeladyMode,
}

impl<'a> PolicySpec<'a> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            seed: 0,
            rac: RacConfig::new(capacity),
            trace: None,
            belady_mode: BeladyMode::Bypass,
        }
    }
}

pub fn make_policy(name: &str, spec: &PolicySpec<'_>) -> Result<Box<dyn Policy>> {
    let c = spec.capacity;
    if c == 0 {
        return Err(Error::usage("capacity must be at least 1"));
    }
    Ok(match name {
        "fifo" => Box::new(Fifo::new()),
        "lru" => Box::new(Lru::new()),
        "clock" => Box::new(Clock::new()),
        "ttl" => Box::new(Ttl::new(c as u64)),
        "2q" => Box::new(TwoQ::new(c)),
        "arc" => Box::new(ArcCache::new(c)),
        "tinylfu" => Box::new(TinyLfu::new(c)),
        "s3fifo" => Box::new(S3Fifo::new(c)),
        "sieve" => Box::new(Sieve::new(c)),
        "lhd" => Box::new(Lhd::new(c)),
        "lecar" => Box::new(LeCaR::new(c, spec.seed)),
        "rac" => {
            let mut cfg = spec.rac.clone();
            cfg.capacity = c;
            Box::new(Rac::new(cfg)?)
        }
        "belady" => {
            let trace = spec.trace.ok_or_else(|| Error::usage("belady needs the whole trace up front"))?;
            Box::new(Belady::new(trace, c, spec.belady_mode)?)
        }
        other => {
            return Err(Error::usage(format!(
                "unknown policy '{other}'; valid names: {}",
                POLICY_NAMES.join("|")
            )))
        }
    })
}
