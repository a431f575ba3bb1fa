//! Request traces and the line-oriented `RACTRACE v1` file format.
//!
//! ```text
//! # optional preamble comments
//! RACTRACE v1 dim=<d> n=<count>
//! # session=<id> occurrence=<k>        (optional episode delimiter)
//! <id> <t> <d decimals> [topic=<int>] [parent=<int>] [key=<int>]
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};

pub const HEADER_MAGIC: &str = "RACTRACE";
pub const FORMAT_VERSION: &str = "v1";

/// One trace event.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: u64,
    /// 1-based time step, equal to the request's position in its trace.
    pub t: u64,
    pub embedding: EmbeddingVector,
    pub topic_truth: Option<u64>,
    /// Id of an earlier request this one depends on.
    pub parent_truth: Option<u64>,
    pub exact_key: Option<u64>,
}

impl Request {
    /// Identity used for exact-match semantics and reuse accounting.
    pub fn item_key(&self) -> u64 {
        self.exact_key.unwrap_or(self.id)
    }
}

/// Marks the first request of one session occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionMark {
    /// Index into `Trace::requests`.
    pub start: usize,
    pub session: u64,
    pub occurrence: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dim: usize,
    pub requests: Vec<Request>,
    /// Free-form preamble lines (written as `# ` comments before the header).
    pub meta: Vec<String>,
    pub sessions: Vec<SessionMark>,
}

impl Trace {
    /// Builds and validates a trace.
    pub fn new(dim: usize, requests: Vec<Request>) -> Result<Self> {
        let trace = Trace { dim, requests, meta: Vec::new(), sessions: Vec::new() };
        trace.validate()?;
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn has_exact_keys(&self) -> bool {
        self.requests.iter().all(|r| r.exact_key.is_some())
    }

    /// Number of distinct items (exact keys, or request ids where a key is absent).
    pub fn unique_footprint(&self) -> usize {
        self.requests.iter().map(Request::item_key).collect::<HashSet<_>>().len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::validation("trace dimension must be positive"));
        }
        let mut seen: HashMap<u64, u64> = HashMap::with_capacity(self.requests.len());
        for (i, r) in self.requests.iter().enumerate() {
            let expected = i as u64 + 1;
            if r.t != expected {
                return Err(Error::validation(format!(
                    "request {} has t={} but position {expected} (t must increase by 1 from 1)",
                    r.id, r.t
                )));
            }
            if r.embedding.dim() != self.dim {
                return Err(Error::validation(format!(
                    "request {} has dimension {} but trace dimension is {}",
                    r.id,
                    r.embedding.dim(),
                    self.dim
                )));
            }
            if let Some(p) = r.parent_truth {
                match seen.get(&p) {
                    Some(&pt) if pt < r.t => {}
                    _ => {
                        return Err(Error::validation(format!(
                            "request {} names parent {p} which is not an earlier request",
                            r.id
                        )))
                    }
                }
            }
            if seen.insert(r.id, r.t).is_some() {
                return Err(Error::validation(format!("duplicate request id {}", r.id)));
            }
        }
        let mut last = None;
        for m in &self.sessions {
            if m.start >= self.requests.len().max(1) || last.is_some_and(|l| m.start <= l) {
                return Err(Error::validation(format!("session mark at index {} out of order", m.start)));
            }
            last = Some(m.start);
        }
        Ok(())
    }

    /// Serializes to the text format.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.requests.len() * (self.dim * 16 + 32));
        for line in &self.meta {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{HEADER_MAGIC} {FORMAT_VERSION} dim={} n={}", self.dim, self.requests.len());
        let mut marks = self.sessions.iter().peekable();
        for (i, r) in self.requests.iter().enumerate() {
            while let Some(m) = marks.peek() {
                if m.start != i {
                    break;
                }
                let _ = writeln!(out, "# session={} occurrence={}", m.session, m.occurrence);
                marks.next();
            }
            let _ = write!(out, "{} {}", r.id, r.t);
            for v in r.embedding.as_slice() {
                out.push(' ');
                out.push_str(&format_decimal(*v));
            }
            if let Some(x) = r.topic_truth {
                let _ = write!(out, " topic={x}");
            }
            if let Some(x) = r.parent_truth {
                let _ = write!(out, " parent={x}");
            }
            if let Some(x) = r.exact_key {
                let _ = write!(out, " key={x}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses and validates the text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = Vec::new();
        let mut header: Option<(usize, usize)> = None;
        let mut requests = Vec::new();
        let mut sessions = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            let Some((dim, _)) = header else {
                if let Some(c) = line.strip_prefix('#') {
                    meta.push(c.strip_prefix(' ').unwrap_or(c).to_string());
                    continue;
                }
                header = Some(parse_header(line, line_no)?);
                continue;
            };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some((session, occurrence)) = parse_session_mark(c.trim()) {
                    sessions.push(SessionMark { start: requests.len(), session, occurrence });
                }
                continue;
            }
            requests.push(parse_record(line, line_no, dim)?);
        }

        let Some((dim, n)) = header else {
            return Err(Error::parse(text.lines().count().max(1), "missing RACTRACE header"));
        };
        if n != requests.len() {
            return Err(Error::validation(format!("header declares n={n} but {} records follow", requests.len())));
        }
        // A mark after the final record would point past the end.
        if sessions.last().is_some_and(|m: &SessionMark| m.start >= requests.len()) {
            return Err(Error::validation("session mark with no following records"));
        }
        let trace = Trace { dim, requests, meta, sessions };
        trace.validate()?;
        Ok(trace)
    }
}

/// Nine significant digits, scientific notation.
pub fn format_decimal(v: f64) -> String {
    format!("{v:.8e}")
}

/// Rounds `v` to the value that survives a save/load cycle unchanged.
pub fn quantize(v: f64) -> f64 {
    format_decimal(v).parse().expect("formatted float parses")
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace();
    if it.next() != Some(HEADER_MAGIC) {
        return Err(Error::parse(line_no, "expected RACTRACE header"));
    }
    if it.next() != Some(FORMAT_VERSION) {
        return Err(Error::parse(line_no, "unsupported trace format version"));
    }
    let dim = it
        .next()
        .and_then(|s| s.strip_prefix("dim="))
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| Error::parse(line_no, "header missing dim=<d>"))?;
    let n = it
        .next()
        .and_then(|s| s.strip_prefix("n="))
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| Error::parse(line_no, "header missing n=<count>"))?;
    if it.next().is_some() {
        return Err(Error::parse(line_no, "trailing tokens in header"));
    }
    if dim == 0 {
        return Err(Error::parse(line_no, "dim must be positive"));
    }
    Ok((dim, n))
}

fn parse_session_mark(c: &str) -> Option<(u64, u64)> {
    let mut it = c.split_whitespace();
    let session = it.next()?.strip_prefix("session=")?.parse().ok()?;
    let occurrence = it.next()?.strip_prefix("occurrence=")?.parse().ok()?;
    it.next().is_none().then_some((session, occurrence))
}

fn parse_record(line: &str, line_no: usize, dim: usize) -> Result<Request> {
    let mut it = line.split_whitespace();
    let mut int = |what: &str| -> Result<u64> {
        it.next()
            .ok_or_else(|| Error::parse(line_no, format!("missing {what}")))?
            .parse::<u64>()
            .map_err(|e| Error::parse(line_no, format!("bad {what}: {e}")))
    };
    let id = int("id")?;
    let t = int("t")?;
    let mut values = Vec::with_capacity(dim);
    let mut tokens = line.split_whitespace().skip(2);
    for k in 0..dim {
        let tok = tokens
            .next()
            .ok_or_else(|| Error::parse(line_no, format!("expected {dim} components, found {k}")))?;
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad embedding component {tok:?}")))?;
        values.push(v);
    }
    let (mut topic, mut parent, mut key) = (None, None, None);
    for tok in tokens {
        let (name, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("unexpected token {tok:?}")))?;
        let slot = match name {
            "topic" => &mut topic,
            "parent" => &mut parent,
            "key" => &mut key,
            _ => return Err(Error::parse(line_no, format!("unknown field {name:?}"))),
        };
        if slot.is_some() {
            return Err(Error::parse(line_no, format!("duplicate field {name:?}")));
        }
        *slot = Some(val.parse::<u64>().map_err(|e| Error::parse(line_no, format!("bad {name}: {e}")))?);
    }
    let embedding = EmbeddingVector::new(values)
        .map_err(|e| Error::validation(format!("line {line_no}: {e}")))?;
    Ok(Request { id, t, embedding, topic_truth: topic, parent_truth: parent, exact_key: key })
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Trace::parse(&text)
}

pub fn save_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace.to_text()).map_err(|e| Error::io(path, e))
}
