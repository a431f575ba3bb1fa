//! Synthetic semi-Markov workload generator.
//!
//! A trace is a concatenation of topic episodes, each one complete session
//! emitted contiguously. Every topic has a context anchor direction and one
//! dependency template; each of its sessions (variants) opens with a
//! paraphrase of the anchor and grows the template's DAG around it, so
//! paraphrased roots are semantic hits on one another while later turns are
//! specific to their session. Episode topics follow Zipf(gamma) over ranks.
//! A share of episodes replay an earlier session bit for bit; which earlier
//! session is replayed is steered so that the fraction of reuses farther
//! apart than `capacity_ref` lands on `long_reuse_target`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Zipf};

use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::trace::{quantize, Request, SessionMark, Trace};

/// Allowed miss of the measured long-reuse ratio.
pub const LONG_REUSE_TOLERANCE: f64 = 0.05;
const MAX_ATTEMPTS: u64 = 24;
/// Cap on pairwise anchor similarity.
const ANCHOR_MAX_SIM: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub n_topics: usize,
    pub sessions_per_topic: usize,
    pub trace_len: usize,
    pub zipf_gamma: f64,
    pub long_reuse_target: f64,
    pub capacity_ref: usize,
    pub dim: usize,
    /// Per-vector noise scale of root paraphrases (before renormalizing).
    pub intra_topic_noise: f64,
    /// Probability that an episode replays an earlier session of its topic.
    pub repeat_fraction: f64,
    /// Similarity between a turn and the turn it depends on.
    pub child_sim: f64,
    pub min_session_len: usize,
    pub max_session_len: usize,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            n_topics: 120,
            sessions_per_topic: 40,
            trace_len: 10_000,
            zipf_gamma: 1.0,
            long_reuse_target: 0.5,
            capacity_ref: 1000,
            dim: 64,
            intra_topic_noise: 0.15,
            repeat_fraction: 0.3,
            child_sim: 0.72,
            min_session_len: 4,
            max_session_len: 12,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::usage(m));
        if self.n_topics == 0 || self.sessions_per_topic == 0 {
            return bad("n_topics and sessions_per_topic must be positive".into());
        }
        if self.trace_len == 0 {
            return bad("trace_len must be positive".into());
        }
        if !(self.zipf_gamma > 0.0 && self.zipf_gamma.is_finite()) {
            return bad(format!("zipf gamma must be positive, got {}", self.zipf_gamma));
        }
        if !(0.0..=1.0).contains(&self.long_reuse_target) {
            return bad(format!("long_reuse_target must lie in [0, 1], got {}", self.long_reuse_target));
        }
        if !(0.0..=1.0).contains(&self.repeat_fraction) {
            return bad(format!("repeat_fraction must lie in [0, 1], got {}", self.repeat_fraction));
        }
        if !(self.intra_topic_noise >= 0.0 && self.intra_topic_noise.is_finite()) {
            return bad(format!("intra_topic_noise must be nonnegative, got {}", self.intra_topic_noise));
        }
        if !(self.child_sim > 0.0 && self.child_sim < 1.0) {
            return bad(format!("child_sim must lie in (0, 1), got {}", self.child_sim));
        }
        if self.min_session_len == 0 || self.min_session_len > self.max_session_len {
            return bad("session length bounds must satisfy 1 <= min <= max".into());
        }
        if self.dim < self.max_session_len + 2 {
            return bad(format!("dim must be at least max_session_len + 2 = {}", self.max_session_len + 2));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "n_topics={} sessions_per_topic={} trace_len={} gamma={} long_reuse={} capacity_ref={} dim={} noise={} repeat_fraction={} child_sim={} session_len={}..{} seed={}",
            self.n_topics,
            self.sessions_per_topic,
            self.trace_len,
            self.zipf_gamma,
            self.long_reuse_target,
            self.capacity_ref,
            self.dim,
            self.intra_topic_noise,
            self.repeat_fraction,
            self.child_sim,
            self.min_session_len,
            self.max_session_len,
            self.seed
        )
    }

    fn branch_scale(&self) -> f64 {
        (1.0 / (self.child_sim * self.child_sim) - 1.0).sqrt()
    }
}

/// One session's ground truth: per-turn vectors and parent positions.
#[derive(Debug, Clone)]
pub struct SessionTemplate {
    pub topic: usize,
    pub queries: Vec<EmbeddingVector>,
    /// `dag[j]` is the position of turn `j`'s parent; `None` for the root.
    pub dag: Vec<Option<usize>>,
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quantized unit vector; values survive the text format unchanged.
fn finish(v: Vec<f64>) -> EmbeddingVector {
    let q: Vec<f64> = unit(v).into_iter().map(quantize).collect();
    EmbeddingVector::new(q).expect("quantized unit vector")
}

fn sample_anchors(p: &GenParams) -> Result<Vec<Vec<f64>>> {
    let mut rng = seeded(p.seed, 1);
    let mut anchors: Vec<Vec<f64>> = Vec::with_capacity(p.n_topics);
    let budget = 1000 * p.n_topics;
    let mut tries = 0;
    while anchors.len() < p.n_topics {
        tries += 1;
        if tries > budget {
            return Err(Error::Generation(format!(
                "could not place {} topic anchors with pairwise similarity <= {ANCHOR_MAX_SIM} in dimension {}",
                p.n_topics, p.dim
            )));
        }
        let v = unit(gaussian(&mut rng, p.dim));
        if anchors.iter().all(|a| dot(a, &v) <= ANCHOR_MAX_SIM) {
            anchors.push(v);
        }
    }
    Ok(anchors)
}

/// Parent positions: turn `j` depends on an earlier turn `i` with
/// probability proportional to `2^-(j-i)`.
fn sample_dag(rng: &mut impl Rng, len: usize) -> Vec<Option<usize>> {
    let mut dag = vec![None];
    for j in 1..len {
        let weights: Vec<f64> = (0..j).map(|i| 0.5f64.powi((j - i) as i32)).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = j - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        dag.push(Some(pick));
    }
    dag
}

/// Everything fixed before episodes are laid out: anchors, per-topic DAG
/// templates, and lazily built session variants.
struct World<'p> {
    p: &'p GenParams,
    anchors: Vec<Vec<f64>>,
    dags: Vec<Vec<Option<usize>>>,
    sessions: HashMap<(usize, usize), SessionTemplate>,
}

impl<'p> World<'p> {
    fn new(p: &'p GenParams) -> Result<Self> {
        let anchors = sample_anchors(p)?;
        let mut rng = seeded(p.seed, 2);
        let dags = (0..p.n_topics)
            .map(|_| {
                let len = rng.random_range(p.min_session_len..=p.max_session_len);
                sample_dag(&mut rng, len)
            })
            .collect();
        Ok(Self { p, anchors, dags, sessions: HashMap::new() })
    }

    fn session(&mut self, topic: usize, variant: usize) -> &SessionTemplate {
        let p = self.p;
        let anchor = &self.anchors[topic];
        let dag = &self.dags[topic];
        self.sessions.entry((topic, variant)).or_insert_with(|| {
            let stream = 16 + (topic * p.sessions_per_topic + variant) as u64;
            let mut rng = seeded(p.seed, stream);
            let d = p.dim;
            let sd = p.intra_topic_noise / (d as f64).sqrt();
            let root: Vec<f64> = anchor.iter().zip(gaussian(&mut rng, d)).map(|(a, g)| a + sd * g).collect();
            let mut raw: Vec<Vec<f64>> = vec![unit(root)];
            // Orthonormal basis of everything said so far.
            let mut basis = raw.clone();
            let rho = p.branch_scale();
            for parent in dag.iter().skip(1) {
                let parent = parent.expect("non-root turns have parents");
                let mut w = gaussian(&mut rng, d);
                for _ in 0..2 {
                    for u in &basis {
                        let c = dot(&w, u);
                        w.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
                    }
                }
                let w = unit(w);
                let v: Vec<f64> = raw[parent].iter().zip(&w).map(|(a, b)| a + rho * b).collect();
                basis.push(w);
                raw.push(unit(v));
            }
            SessionTemplate { topic, queries: raw.into_iter().map(finish).collect(), dag: dag.clone() }
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Episode {
    topic: usize,
    variant: usize,
}

/// Lays out episodes and reports the long-reuse ratio they achieve.
fn layout(world: &World<'_>, attempt: u64) -> Result<(Vec<Episode>, f64)> {
    let p = world.p;
    let mut rng = seeded(p.seed ^ 0x5eed, 1000 + attempt);
    let zipf = Zipf::new(p.n_topics as f64, p.zipf_gamma).map_err(|e| Error::usage(format!("zipf: {e}")))?;
    let mut used = vec![0usize; p.n_topics];
    // (topic, variant) -> start of the latest occurrence
    let mut last_start: HashMap<(usize, usize), usize> = HashMap::new();
    let mut episodes = Vec::new();
    let (mut pos, mut long, mut total) = (0usize, 0usize, 0usize);
    let target = p.long_reuse_target;
    while pos < p.trace_len {
        let topic = zipf.sample(&mut rng) as usize - 1;
        let len = world.dags[topic].len().min(p.trace_len - pos);
        let exhausted = used[topic] == p.sessions_per_topic;
        let wants_repeat = used[topic] > 0 && (exhausted || rng.random::<f64>() < p.repeat_fraction);
        let mut chosen = None;
        if wants_repeat {
            let err = |l: usize| ((long + l) as f64 / (total + len) as f64 - target).abs();
            let prefer_long = err(len) <= err(0);
            let (mut longs, mut shorts) = (Vec::new(), Vec::new());
            for v in 0..used[topic] {
                let gap = pos - last_start[&(topic, v)];
                if gap > p.capacity_ref {
                    longs.push(v);
                } else {
                    shorts.push(v);
                }
            }
            let (want, other) = if prefer_long { (&longs, &shorts) } else { (&shorts, &longs) };
            if !want.is_empty() {
                chosen = Some((want[rng.random_range(0..want.len())], prefer_long));
            } else if exhausted {
                chosen = Some((other[rng.random_range(0..other.len())], !prefer_long));
            }
        }
        let ep = match chosen {
            Some((variant, is_long)) => {
                total += len;
                if is_long {
                    long += len;
                }
                Episode { topic, variant }
            }
            None => {
                used[topic] += 1;
                Episode { topic, variant: used[topic] - 1 }
            }
        };
        last_start.insert((ep.topic, ep.variant), pos);
        pos += len;
        episodes.push(ep);
    }
    let ratio = if total == 0 { 0.0 } else { long as f64 / total as f64 };
    Ok((episodes, ratio))
}

fn emit(world: &mut World<'_>, episodes: &[Episode]) -> Result<Trace> {
    let p = world.p;
    let mut requests = Vec::with_capacity(p.trace_len);
    let mut marks = Vec::new();
    let mut occurrences: HashMap<(usize, usize), u64> = HashMap::new();
    // exact key of each (topic, variant, turn)
    let mut keys: HashMap<(usize, usize, usize), u64> = HashMap::new();
    for ep in episodes {
        let occ = occurrences.entry((ep.topic, ep.variant)).or_insert(0);
        *occ += 1;
        let session_id = (ep.topic * p.sessions_per_topic + ep.variant + 1) as u64;
        marks.push(SessionMark { start: requests.len(), session: session_id, occurrence: *occ });
        let s = world.session(ep.topic, ep.variant).clone();
        let base = requests.len() as u64;
        for (j, q) in s.queries.iter().enumerate() {
            if requests.len() == p.trace_len {
                break;
            }
            let next_key = keys.len() as u64 + 1;
            let key = *keys.entry((ep.topic, ep.variant, j)).or_insert(next_key);
            let t = requests.len() as u64 + 1;
            requests.push(Request {
                id: t,
                t,
                embedding: q.clone(),
                topic_truth: Some(ep.topic as u64 + 1),
                parent_truth: s.dag[j].map(|pj| base + pj as u64 + 1),
                exact_key: Some(key),
            });
        }
    }
    let mut trace = Trace::new(p.dim, requests)?;
    trace.sessions = marks;
    trace.meta.push(format!("gen {}", p.describe()));
    trace.validate()?;
    Ok(trace)
}

/// Generates a trace. Deterministic in `params`.
pub fn generate_trace(params: &GenParams) -> Result<Trace> {
    params.validate()?;
    let mut world = World::new(params)?;
    let mut best: Option<(f64, u64)> = None;
    for attempt in 0..MAX_ATTEMPTS {
        let (episodes, _) = layout(&world, attempt)?;
        let trace = emit(&mut world, &episodes)?;
        let measured = measure_long_reuse(&trace, params.capacity_ref);
        let miss = (measured - params.long_reuse_target).abs();
        if miss <= LONG_REUSE_TOLERANCE {
            return Ok(trace);
        }
        if best.is_none_or(|(m, _)| miss < m) {
            best = Some((miss, attempt));
        }
    }
    let closest = best.map_or(f64::NAN, |(m, _)| m);
    Err(Error::Generation(format!(
        "long-reuse target {} is out of reach for trace_len={} capacity_ref={} repeat_fraction={} (closest attempt missed by {closest:.3}; tolerance {LONG_REUSE_TOLERANCE})",
        params.long_reuse_target, params.trace_len, params.capacity_ref, params.repeat_fraction
    )))
}

/// Generates with `capacity_ref` matched to `frac` of the trace's own unique
/// footprint, so that "long" means "longer than the cache under test".
/// Returns the trace and that capacity.
pub fn generate_calibrated(params: &GenParams, frac: f64) -> Result<(Trace, usize)> {
    if !(frac > 0.0 && frac.is_finite()) {
        return Err(Error::usage(format!("capacity fraction must be positive, got {frac}")));
    }
    let mut p = params.clone();
    // Start near the answer: repeats add no footprint.
    let guess = frac * p.trace_len as f64 * (1.0 - p.repeat_fraction);
    p.capacity_ref = (guess.round() as usize).max(1);
    let mut seen = Vec::new();
    for _ in 0..8 {
        let trace = generate_trace(&p)?;
        let want = ((frac * trace.unique_footprint() as f64).round() as usize).max(1);
        if want == p.capacity_ref || seen.contains(&want) {
            return Ok((trace, p.capacity_ref));
        }
        seen.push(p.capacity_ref);
        p.capacity_ref = want;
    }
    let trace = generate_trace(&p)?;
    Ok((trace, p.capacity_ref))
}

/// Item identity for reuse measurement: the exact key, else the bit pattern
/// of the embedding.
fn identity_keys(trace: &Trace) -> Vec<u64> {
    if trace.has_exact_keys() {
        return trace.requests.iter().map(|r| r.exact_key.expect("checked")).collect();
    }
    let mut ids: HashMap<Vec<u64>, u64> = HashMap::new();
    trace
        .requests
        .iter()
        .map(|r| {
            let bits: Vec<u64> = r.embedding.as_slice().iter().map(|x| x.to_bits()).collect();
            let n = ids.len() as u64;
            *ids.entry(bits).or_insert(n)
        })
        .collect()
}

/// Reuse distances (`t - t_prev` of the same item), in trace order.
pub fn reuse_distances(trace: &Trace) -> Vec<u64> {
    let mut last: HashMap<u64, u64> = HashMap::new();
    let mut out = Vec::new();
    for (i, k) in identity_keys(trace).into_iter().enumerate() {
        let t = i as u64 + 1;
        if let Some(prev) = last.insert(k, t) {
            out.push(t - prev);
        }
    }
    out
}

/// Fraction of reuse events farther apart than `capacity_ref`; 0 without reuse.
pub fn measure_long_reuse(trace: &Trace, capacity_ref: usize) -> f64 {
    let d = reuse_distances(trace);
    if d.is_empty() {
        return 0.0;
    }
    d.iter().filter(|x| **x > capacity_ref as u64).count() as f64 / d.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    /// 1st percentile of similarity between paraphrases of one context.
    pub p1_intra: f64,
    /// 99th percentile of similarity between distinct items.
    pub p99_cross: f64,
    pub tau: f64,
    pub pass: bool,
}

fn percentile(mut xs: Vec<f64>, q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let i = ((xs.len() - 1) as f64 * q).round() as usize;
    xs[i]
}

/// Samples equivalent pairs (root paraphrases of one topic) and distinct
/// pairs (different topics, or a turn and the turn it depends on) and checks
/// that `tau` separates them.
pub fn validate_separation(params: &GenParams, tau: f64, pairs: usize) -> Result<SeparationReport> {
    params.validate()?;
    let mut world = World::new(params)?;
    let mut rng = seeded(params.seed, 3);
    let (mut intra, mut cross) = (Vec::with_capacity(pairs), Vec::with_capacity(pairs));
    let n = params.n_topics;
    let v = params.sessions_per_topic;
    for _ in 0..pairs {
        let s = rng.random_range(0..n);
        if v >= 2 {
            let a = rng.random_range(0..v);
            let b = (a + rng.random_range(1..v)) % v;
            let ra = world.session(s, a).queries[0].clone();
            let rb = world.session(s, b).queries[0].clone();
            intra.push(ra.dot(&rb));
        }
        if n >= 2 && rng.random::<bool>() {
            let u = (s + rng.random_range(1..n)) % n;
            let qa = world.session(s, rng.random_range(0..v)).queries.clone();
            let qb = world.session(u, rng.random_range(0..v)).queries.clone();
            let x = &qa[rng.random_range(0..qa.len())];
            let y = &qb[rng.random_range(0..qb.len())];
            cross.push(x.dot(y));
        } else {
            let sess = world.session(s, rng.random_range(0..v)).clone();
            let j = rng.random_range(1..sess.queries.len().max(2)).min(sess.queries.len() - 1);
            if let Some(pj) = sess.dag[j] {
                cross.push(sess.queries[j].dot(&sess.queries[pj]));
            }
        }
    }
    let p1_intra = if intra.is_empty() { 1.0 } else { percentile(intra, 0.01) };
    let p99_cross = percentile(cross, 0.99);
    Ok(SeparationReport { p1_intra, p99_cross, tau, pass: p1_intra >= tau && p99_cross < tau })
}

/// Least-squares slope of log(count) against log(rank) over the `top`
/// most frequent topics, counting episodes per topic.
pub fn zipf_slope(trace: &Trace, top: usize) -> Option<f64> {
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for m in &trace.sessions {
        let topic = trace.requests[m.start].topic_truth?;
        *counts.entry(topic).or_insert(0) += 1;
    }
    let mut c: Vec<usize> = counts.into_values().collect();
    c.sort_unstable_by(|a, b| b.cmp(a));
    c.truncate(top);
    if c.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = (1..=c.len()).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = c.iter().map(|&k| (k as f64).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// The two-topic walkthrough: a coding context `a0` with five follow-ups, a
/// writing task whose constraints `b2` arrive third, then a return to `a0`
/// with new follow-ups, and a second writing task reusing `b2`. 24 requests,
/// exact keys on every request; only `a0` and `b2` recur.
pub fn two_topic_walkthrough() -> Trace {
    const D: usize = 27;
    let e = |i: usize| {
        let mut v = vec![0.0; D];
        v[i] = 1.0;
        v
    };
    // Follow-up around a context: similarity 1/sqrt(1 + 1.2^2) ~ 0.64 to the
    // context, ~0.41 between follow-ups.
    let around = |c: usize, i: usize| {
        let v: Vec<f64> = e(c).iter().zip(e(i)).map(|(a, b)| a + 1.2 * b).collect();
        finish(v)
    };
    let a0 = finish(e(0));
    let b2 = finish(e(11));
    let mut items: Vec<(u64, EmbeddingVector)> = Vec::new();
    // a0..a5
    items.push((0, a0.clone()));
    for i in 1..=5usize {
        items.push((i as u64, around(0, i)));
    }
    // b0, b1 (a small draft chain), b2, b3..b5
    items.push((6, finish(e(12))));
    items.push((7, around(12, 13)));
    items.push((8, b2.clone()));
    for (k, i) in (9..=11).zip(14..=16) {
        items.push((k, around(11, i)));
    }
    // a0, a1*..a5*
    items.push((0, a0));
    for (k, i) in (12..=16).zip(17..=21) {
        items.push((k, around(0, i)));
    }
    // b0*, b1*, b2, b3*..b5*
    items.push((17, finish(e(22))));
    items.push((18, around(22, 23)));
    items.push((8, b2));
    for (k, i) in (19..=21).zip(24..=26) {
        items.push((k, around(11, i)));
    }
    let requests = items
        .into_iter()
        .enumerate()
        .map(|(i, (key, embedding))| Request {
            id: i as u64 + 1,
            t: i as u64 + 1,
            embedding,
            topic_truth: None,
            parent_truth: None,
            exact_key: Some(key),
        })
        .collect();
    let mut t = Trace::new(D, requests).expect("well-formed");
    t.meta.push("example-one".into());
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GenParams {
        GenParams { n_topics: 20, trace_len: 2000, capacity_ref: 150, seed: 3, ..GenParams::default() }
    }

    #[test]
    fn deterministic() {
        let a = generate_trace(&small()).unwrap();
        let b = generate_trace(&small()).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.len(), 2000);
    }

    #[test]
    fn long_reuse_on_target() {
        for target in [0.3, 0.5, 0.8] {
            let p = GenParams { long_reuse_target: target, ..small() };
            let t = generate_trace(&p).unwrap();
            let m = measure_long_reuse(&t, p.capacity_ref);
            assert!((m - target).abs() <= LONG_REUSE_TOLERANCE, "target {target} measured {m}");
        }
    }

    #[test]
    fn infeasible_target_is_generation_error() {
        let p = GenParams { long_reuse_target: 1.0, trace_len: 300, capacity_ref: 5000, ..small() };
        assert!(matches!(generate_trace(&p), Err(Error::Generation(_))));
    }

    #[test]
    fn episodes_are_contiguous_and_parents_local() {
        let t = generate_trace(&small()).unwrap();
        let mut bounds: Vec<usize> = t.sessions.iter().map(|m| m.start).collect();
        bounds.push(t.len());
        for w in bounds.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let topic = t.requests[lo].topic_truth;
            for r in &t.requests[lo..hi] {
                assert_eq!(r.topic_truth, topic);
                if let Some(p) = r.parent_truth {
                    assert!(p > lo as u64 && p < r.t, "parent escapes its occurrence");
                }
            }
            assert!(t.requests[lo].parent_truth.is_none());
        }
    }

    #[test]
    fn repeats_are_bit_identical() {
        let t = generate_trace(&small()).unwrap();
        let mut first: HashMap<u64, usize> = HashMap::new();
        let mut bounds: Vec<usize> = t.sessions.iter().map(|m| m.start).collect();
        bounds.push(t.len());
        let mut repeats = 0;
        for (i, m) in t.sessions.iter().enumerate() {
            match first.get(&m.session) {
                None => {
                    first.insert(m.session, i);
                }
                Some(&j) => {
                    repeats += 1;
                    let a = &t.requests[bounds[j]..bounds[j + 1]];
                    let b = &t.requests[bounds[i]..bounds[i + 1]];
                    for (x, y) in a.iter().zip(b) {
                        assert_eq!(x.embedding.as_slice(), y.embedding.as_slice());
                        assert_eq!(x.exact_key, y.exact_key);
                    }
                }
            }
        }
        assert!(repeats > 0);
    }

    #[test]
    fn geometry() {
        let p = small();
        let mut w = World::new(&p).unwrap();
        let s = w.session(0, 0).clone();
        for (j, par) in s.dag.iter().enumerate().skip(1) {
            let sim = s.queries[j].dot(&s.queries[par.unwrap()]);
            assert!((sim - p.child_sim).abs() < 1e-6, "turn {j} parent {par:?} sim {sim} dag {:?}", s.dag);
        }
        let r2 = w.session(0, 1).queries[0].clone();
        assert!(s.queries[0].dot(&r2) > 0.9);
    }

    #[test]
    fn measure_examples() {
        let mk = |keys: &[u64]| {
            let e = EmbeddingVector::new(vec![1.0]).unwrap();
            let reqs = keys
                .iter()
                .enumerate()
                .map(|(i, k)| Request {
                    id: i as u64 + 1,
                    t: i as u64 + 1,
                    embedding: e.clone(),
                    topic_truth: None,
                    parent_truth: None,
                    exact_key: Some(*k),
                })
                .collect();
            Trace::new(1, reqs).unwrap()
        };
        assert_eq!(measure_long_reuse(&mk(&[1, 2, 3]), 2), 0.0);
        // single repeat at distance C+1
        assert_eq!(measure_long_reuse(&mk(&[1, 2, 3, 1]), 2), 1.0);
        // distances {C-1, C+1, C+5} with C = 4
        let mut keys = vec![1, 100, 101, 1]; // 1 reused at distance 3
        keys.extend([2, 102, 103, 104, 105, 2]); // distance 5
        keys.extend([3, 106, 107, 108, 109, 110, 111, 112, 113, 3]); // distance 9
        assert!((measure_long_reuse(&mk(&keys), 4) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn separation() {
        let rep = validate_separation(&GenParams::default(), 0.85, 2000).unwrap();
        assert!(rep.pass, "{rep:?}");
        let zero = GenParams { intra_topic_noise: 0.0, ..GenParams::default() };
        let rep = validate_separation(&zero, 0.85, 200).unwrap();
        assert!(rep.p1_intra > 1.0 - 1e-8);
    }

    #[test]
    fn cross_topic_roots_near_orthogonal() {
        let p = GenParams { dim: 256, intra_topic_noise: 0.01, ..small() };
        let mut w = World::new(&p).unwrap();
        let mut sims = Vec::new();
        for s in 1..p.n_topics {
            let a = w.session(0, 0).queries[0].clone();
            sims.push(a.dot(&w.session(s, 0).queries[0]));
        }
        let mean = sims.iter().sum::<f64>() / sims.len() as f64;
        assert!(mean.abs() < 0.05, "{mean}");
    }

    #[test]
    fn two_topic_walkthrough_shape() {
        let t = two_topic_walkthrough();
        assert_eq!(t.len(), 24);
        assert!(t.has_exact_keys());
        assert_eq!(t.unique_footprint(), 22);
    }
}
