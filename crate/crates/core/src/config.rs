//! Flat `key=value` configuration files and the effective run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are
//! case-sensitive; `_` and `-` are interchangeable. A key may appear once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gen::GenParams;
use crate::policy::PolicySpec;
use crate::rac::RacVariant;

/// Parsed `key=value` pairs, remembering the line each came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvFile {
    entries: BTreeMap<String, (String, usize)>,
}

fn norm_key(k: &str) -> String {
    k.trim().replace('_', "-")
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected key=value, got {line:?}")))?;
            let key = norm_key(k);
            if key.is_empty() {
                return Err(Error::parse(line_no, "empty key"));
            }
            if entries.insert(key.clone(), (v.trim().to_string(), line_no)).is_some() {
                return Err(Error::parse(line_no, format!("duplicate key {key:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets `key`, replacing any earlier value (used to layer flags over a
    /// file).
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(norm_key(key), (value.into(), 0));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(&norm_key(key)).map(|(v, _)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses the value under `key`, if present.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((v, line)) = self.entries.get(&norm_key(key)) else {
            return Ok(None);
        };
        v.parse::<T>()
            .map(Some)
            .map_err(|e| Error::parse(*line, format!("bad value for {key}: {e}")))
    }

    /// Parses a comma-separated list under `key`, if present.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((v, line)) = self.entries.get(&norm_key(key)) else {
            return Ok(None);
        };
        let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(Error::parse(*line, format!("empty list for {key}")));
        }
        items
            .into_iter()
            .map(|s| s.parse::<T>().map_err(|e| Error::parse(*line, format!("bad item {s:?} in {key}: {e}"))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Fails on any key outside `known`.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        for (k, (_, line)) in &self.entries {
            if !known.contains(&k.as_str()) {
                return Err(Error::parse(*line, format!("unknown key {k:?}; known keys: {}", known.join(", "))));
            }
        }
        Ok(())
    }
}

/// Effective configuration of a `gen`/`run`/`sweep` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub trace: Option<String>,
    pub out: Option<String>,
    pub policy: String,
    /// Capacity as a fraction of the trace's unique footprint.
    pub capacity: f64,
    /// Absolute capacity; overrides `capacity` when set.
    pub capacity_abs: Option<usize>,
    pub tau: f64,
    /// Routing gate; defaults to `tau`.
    pub tau_route: Option<f64>,
    pub tau_edge: f64,
    /// Decay rate; defaults to 1/C.
    pub alpha: Option<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub long_reuse: f64,
    pub topics: usize,
    pub sessions: usize,
    pub len: usize,
    pub dim: usize,
    pub noise: f64,
    pub repeat_fraction: f64,
    pub capacity_ref: usize,
    pub sweep_file: Option<String>,
    pub jobs: Option<usize>,
    pub exact_keys: bool,
    pub structural_rank: bool,
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GenParams::default();
        Self {
            seed: g.seed,
            trace: None,
            out: None,
            policy: "rac".to_string(),
            capacity: 0.1,
            capacity_abs: None,
            tau: 0.85,
            tau_route: None,
            tau_edge: 0.6,
            alpha: None,
            lambda: 1.0,
            gamma: g.zipf_gamma,
            long_reuse: g.long_reuse_target,
            topics: g.n_topics,
            sessions: g.sessions_per_topic,
            len: g.trace_len,
            dim: g.dim,
            noise: g.intra_topic_noise,
            repeat_fraction: g.repeat_fraction,
            capacity_ref: g.capacity_ref,
            sweep_file: None,
            jobs: None,
            exact_keys: false,
            structural_rank: false,
            timing: false,
        }
    }
}

/// Keys accepted in a run configuration file.
pub const RUN_KEYS: &[&str] = &[
    "seed",
    "trace",
    "out",
    "policy",
    "capacity",
    "capacity-abs",
    "tau",
    "tau-route",
    "tau-edge",
    "alpha",
    "lambda",
    "gamma",
    "long-reuse",
    "topics",
    "sessions",
    "len",
    "dim",
    "noise",
    "repeat-fraction",
    "capacity-ref",
    "sweep-file",
    "jobs",
    "exact-keys",
    "structural-rank",
    "timing",
];

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), ToString::to_string)
}

/// Parses a value that may be `auto` (meaning unset).
fn auto<T: FromStr>(kv: &KvFile, key: &str) -> Result<Option<Option<T>>>
where
    T::Err: std::fmt::Display,
{
    match kv.get(key) {
        None => Ok(None),
        Some("auto") => Ok(Some(None)),
        Some(_) => kv.parsed(key).map(Some),
    }
}

impl RunConfig {
    /// Overlays every key present in `kv`.
    pub fn apply(&mut self, kv: &KvFile) -> Result<()> {
        kv.reject_unknown(RUN_KEYS)?;
        macro_rules! set {
            ($field:ident, $key:literal) => {
                if let Some(v) = kv.parsed($key)? {
                    self.$field = v;
                }
            };
        }
        macro_rules! set_opt {
            ($field:ident, $key:literal) => {
                if let Some(v) = auto(kv, $key)? {
                    self.$field = v;
                }
            };
        }
        set!(seed, "seed");
        set_opt!(trace, "trace");
        set_opt!(out, "out");
        set!(policy, "policy");
        set!(capacity, "capacity");
        set_opt!(capacity_abs, "capacity-abs");
        set!(tau, "tau");
        set_opt!(tau_route, "tau-route");
        set!(tau_edge, "tau-edge");
        set_opt!(alpha, "alpha");
        set!(lambda, "lambda");
        set!(gamma, "gamma");
        set!(long_reuse, "long-reuse");
        set!(topics, "topics");
        set!(sessions, "sessions");
        set!(len, "len");
        set!(dim, "dim");
        set!(noise, "noise");
        set!(repeat_fraction, "repeat-fraction");
        set!(capacity_ref, "capacity-ref");
        set_opt!(sweep_file, "sweep-file");
        set_opt!(jobs, "jobs");
        set!(exact_keys, "exact-keys");
        set!(structural_rank, "structural-rank");
        set!(timing, "timing");
        Ok(())
    }

    /// Serializes to the config-file format; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply(&KvFile::parse(text)?)?;
        Ok(c)
    }

    /// One-line `key=value` echo of every field.
    pub fn echo(&self) -> String {
        self.pairs().iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", self.seed.to_string()),
            ("trace", opt(&self.trace)),
            ("out", opt(&self.out)),
            ("policy", self.policy.clone()),
            ("capacity", self.capacity.to_string()),
            ("capacity-abs", opt(&self.capacity_abs)),
            ("tau", self.tau.to_string()),
            ("tau-route", opt(&self.tau_route)),
            ("tau-edge", self.tau_edge.to_string()),
            ("alpha", opt(&self.alpha)),
            ("lambda", self.lambda.to_string()),
            ("gamma", self.gamma.to_string()),
            ("long-reuse", self.long_reuse.to_string()),
            ("topics", self.topics.to_string()),
            ("sessions", self.sessions.to_string()),
            ("len", self.len.to_string()),
            ("dim", self.dim.to_string()),
            ("noise", self.noise.to_string()),
            ("repeat-fraction", self.repeat_fraction.to_string()),
            ("capacity-ref", self.capacity_ref.to_string()),
            ("sweep-file", opt(&self.sweep_file)),
            ("jobs", opt(&self.jobs)),
            ("exact-keys", self.exact_keys.to_string()),
            ("structural-rank", self.structural_rank.to_string()),
            ("timing", self.timing.to_string()),
        ]
    }

    /// Generator parameters implied by this configuration.
    pub fn gen_params(&self) -> GenParams {
        GenParams {
            n_topics: self.topics,
            sessions_per_topic: self.sessions,
            trace_len: self.len,
            zipf_gamma: self.gamma,
            long_reuse_target: self.long_reuse,
            capacity_ref: self.capacity_ref,
            dim: self.dim,
            intra_topic_noise: self.noise,
            repeat_fraction: self.repeat_fraction,
            seed: self.seed,
            ..GenParams::default()
        }
    }

    /// Cache capacity for a trace with the given unique footprint.
    pub fn resolve_capacity(&self, footprint: usize) -> Result<usize> {
        if let Some(c) = self.capacity_abs {
            return if c == 0 { Err(Error::usage("capacity-abs must be at least 1")) } else { Ok(c) };
        }
        capacity_from_fraction(self.capacity, footprint)
    }

    /// Policy construction parameters for capacity `c`.
    pub fn policy_spec(&self, c: usize) -> PolicySpec<'static> {
        let mut spec = PolicySpec::new(c);
        spec.seed = self.seed;
        spec.rac.tau = self.tau;
        spec.rac.route_tau = self.tau_route;
        spec.rac.tsi.tau_edge = self.tau_edge;
        spec.rac.tsi.lambda = self.lambda;
        if let Some(a) = self.alpha {
            spec.rac.tp.alpha = a;
        }
        spec.rac.use_structural_rank = self.structural_rank;
        spec
    }

    /// Header comment stamped on every output file.
    pub fn header(&self, tool: &str) -> String {
        format!("# {tool} {} seed={} config: {}", crate::VERSION, self.seed, self.echo())
    }
}

/// `round(frac * footprint)`, at least 1.
pub fn capacity_from_fraction(frac: f64, footprint: usize) -> Result<usize> {
    if !(frac > 0.0 && frac.is_finite()) {
        return Err(Error::usage(format!("capacity fraction must be positive, got {frac}")));
    }
    Ok(((frac * footprint as f64).round() as usize).max(1))
}

/// Splits a policy name into the base policy and an optional RAC variant
/// (`rac-notp`, `rac-notsi`).
pub fn split_policy_name(name: &str) -> Result<(&str, Option<RacVariant>)> {
    match name {
        "rac-notp" | "rac-no-tp" => Ok(("rac", Some(RacVariant::NoTp))),
        "rac-notsi" | "rac-no-tsi" => Ok(("rac", Some(RacVariant::NoTsi))),
        other if other.starts_with("rac-") => Err(Error::usage(format!(
            "unknown RAC variant '{other}'; use rac, rac-notp or rac-notsi"
        ))),
        other => Ok((other, None)),
    }
}
