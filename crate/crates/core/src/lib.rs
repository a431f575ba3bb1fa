//! Relation-aware cache replacement for semantic (embedding-keyed) caches.
//!
//! The [`rac`] policy values each resident entry by the decayed prevalence of
//! its topic times the entry's structural importance inside that topic. The
//! crate also carries a baseline roster, a synthetic workload generator, a
//! trace-driven simulator and the sweep/report plumbing used by the CLI.

pub mod baselines;
pub mod config;
pub mod embedding;
pub mod entry;
pub mod error;
pub mod events;
pub mod gen;
pub mod policy;
pub mod rac;
pub mod rank;
pub mod report;
pub mod sim;
pub mod sweep;
pub mod topics;
pub mod tp;
pub mod trace;
pub mod tsi;

pub use embedding::{cosine, cosine_sim, EmbeddingVector};
pub use entry::{CacheEntry, TopicId};
pub use error::{Error, Result};
pub use events::{EntryId, Event};
pub use trace::{load_trace, save_trace, Request, Trace};

/// Crate version, stamped into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
