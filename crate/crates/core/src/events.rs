//! Line-oriented event log shared by the dependency tracker and the simulator.
//!
//! ```text
//! ACCESS <id> <t>
//! LINK <child> <parent> <t>
//! INSERT <id> <t>
//! EVICT <id> <t>
//! HIT <id> <t> <sim>
//! MISS <t>
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type EntryId = u64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Access { id: EntryId, t: u64 },
    Link { child: EntryId, parent: EntryId, t: u64 },
    Insert { id: EntryId, t: u64 },
    Evict { id: EntryId, t: u64 },
    Hit { id: EntryId, t: u64, sim: f64 },
    Miss { t: u64 },
}

impl Event {
    pub fn t(&self) -> u64 {
        match *self {
            Event::Access { t, .. }
            | Event::Link { t, .. }
            | Event::Insert { t, .. }
            | Event::Evict { t, .. }
            | Event::Hit { t, .. }
            | Event::Miss { t } => t,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Access { id, t } => write!(f, "ACCESS {id} {t}"),
            Event::Link { child, parent, t } => write!(f, "LINK {child} {parent} {t}"),
            Event::Insert { id, t } => write!(f, "INSERT {id} {t}"),
            Event::Evict { id, t } => write!(f, "EVICT {id} {t}"),
            Event::Hit { id, t, sim } => write!(f, "HIT {id} {t} {sim:.9}"),
            Event::Miss { t } => write!(f, "MISS {t}"),
        }
    }
}

impl FromStr for Event {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let toks: Vec<&str> = s.split_whitespace().collect();
        let int = |i: usize| -> std::result::Result<u64, String> {
            toks.get(i)
                .ok_or_else(|| format!("missing field {i}"))?
                .parse::<u64>()
                .map_err(|e| format!("field {i}: {e}"))
        };
        let (event, arity) = match toks.first().copied() {
            Some("ACCESS") => (Event::Access { id: int(1)?, t: int(2)? }, 3),
            Some("LINK") => (Event::Link { child: int(1)?, parent: int(2)?, t: int(3)? }, 4),
            Some("INSERT") => (Event::Insert { id: int(1)?, t: int(2)? }, 3),
            Some("EVICT") => (Event::Evict { id: int(1)?, t: int(2)? }, 3),
            Some("HIT") => {
                let sim: f64 = toks
                    .get(3)
                    .ok_or("missing sim")?
                    .parse()
                    .map_err(|e| format!("sim: {e}"))?;
                if !sim.is_finite() {
                    return Err("sim must be finite".into());
                }
                (Event::Hit { id: int(1)?, t: int(2)?, sim }, 4)
            }
            Some("MISS") => (Event::Miss { t: int(1)? }, 2),
            Some(other) => return Err(format!("unknown event {other:?}")),
            None => return Err("empty event".into()),
        };
        if toks.len() != arity {
            return Err(format!("expected {arity} fields, found {}", toks.len()));
        }
        Ok(event)
    }
}

/// Parses a whole log; blank lines and `#` comments are skipped.
pub fn parse_log(text: &str) -> Result<Vec<Event>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| l.parse().map_err(|m| Error::parse(i + 1, m)))
        .collect()
}

pub fn format_log(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_kind() {
        let text = "ACCESS 1 2\nLINK 3 1 4\n# note\n\nINSERT 5 6\nEVICT 5 7\nHIT 3 8 0.900000000\nMISS 9\n";
        let log = parse_log(text).unwrap();
        assert_eq!(log.len(), 6);
        assert_eq!(log[1], Event::Link { child: 3, parent: 1, t: 4 });
        assert_eq!(parse_log(&format_log(&log)).unwrap(), log);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(parse_log("ACCESS 1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_log("ACCESS 1 2 3\n").is_err());
        assert!(parse_log("JUMP 1 2\n").is_err());
        assert!(parse_log("HIT 1 2 nan\n").is_err());
    }
}
