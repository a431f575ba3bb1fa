//! Parameter sweeps: every (policy, capacity, gamma, long-reuse, tau, alpha,
//! lambda, seed) cell is simulated independently and written as one CSV row.
//!
//! Traces are generated once per (capacity, gamma, long-reuse, seed) and
//! shared read-only across cells. Cells run on a rayon pool; rows are sorted
//! before output, so the table does not depend on the schedule. A failing
//! cell becomes a row with `status` set to the error and the sweep goes on.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::config::{split_policy_name, KvFile};
use crate::error::{Error, Result};
use crate::gen::{generate_calibrated, GenParams};
use crate::policy::{PolicySpec, POLICY_NAMES};
use crate::sim::{hr_full, run_named, SimConfig};
use crate::trace::Trace;

/// Column order of the result table.
pub const CSV_COLUMNS: &[&str] = &[
    "policy",
    "capacity_frac",
    "gamma",
    "long_reuse",
    "tau",
    "alpha",
    "lambda",
    "seed",
    "hits",
    "misses",
    "hr",
    "hr_norm",
    "runtime_ms",
    "capacity",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub policies: Vec<String>,
    pub capacity_fracs: Vec<f64>,
    pub gammas: Vec<f64>,
    pub long_reuses: Vec<f64>,
    pub taus: Vec<f64>,
    /// `None` is the default 1/C.
    pub alphas: Vec<Option<f64>>,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Generator settings other than gamma, long-reuse and seed.
    pub base: GenParams,
    pub tau_edge: f64,
    pub tau_route: Option<f64>,
    pub exact_keys: bool,
    pub structural_rank: bool,
    /// Record wall-clock time; off keeps the table byte-reproducible.
    pub timing: bool,
}

impl Default for SweepGrid {
    fn default() -> Self {
        let base = GenParams::default();
        Self {
            policies: vec!["rac".into()],
            capacity_fracs: vec![0.1],
            gammas: vec![base.zipf_gamma],
            long_reuses: vec![base.long_reuse_target],
            taus: vec![0.85],
            alphas: vec![None],
            lambdas: vec![1.0],
            seeds: vec![0],
            base,
            tau_edge: 0.6,
            tau_route: None,
            exact_keys: false,
            structural_rank: false,
            timing: false,
        }
    }
}

/// Keys accepted in a sweep file.
pub const SWEEP_KEYS: &[&str] = &[
    "policies",
    "capacity",
    "gamma",
    "long-reuse",
    "tau",
    "alpha",
    "lambda",
    "seeds",
    "topics",
    "sessions",
    "len",
    "dim",
    "noise",
    "repeat-fraction",
    "tau-edge",
    "tau-route",
    "exact-keys",
    "structural-rank",
    "timing",
];

/// Parses `a..b` (half-open) or a comma list.
fn parse_seeds(kv: &KvFile) -> Result<Option<Vec<u64>>> {
    let Some(v) = kv.get("seeds") else { return Ok(None) };
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| Error::usage(format!("bad seed range start: {e}")))?;
        let b: u64 = b.trim().parse().map_err(|e| Error::usage(format!("bad seed range end: {e}")))?;
        if a >= b {
            return Err(Error::usage(format!("empty seed range {a}..{b}")));
        }
        return Ok(Some((a..b).collect()));
    }
    kv.list("seeds")
}

fn parse_alphas(kv: &KvFile) -> Result<Option<Vec<Option<f64>>>> {
    let Some(items) = kv.list::<String>("alpha")? else { return Ok(None) };
    items
        .iter()
        .map(|s| match s.as_str() {
            "auto" => Ok(None),
            x => x.parse::<f64>().map(Some).map_err(|e| Error::usage(format!("bad alpha {x:?}: {e}"))),
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

impl SweepGrid {
    /// Parses a sweep file. List-valued keys take comma-separated values;
    /// `seeds` also accepts a half-open range `a..b`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut g = Self::default();
        g.apply(&KvFile::parse(text)?)?;
        Ok(g)
    }

    /// Overlays every key present in `kv`, then validates.
    pub fn apply(&mut self, kv: &KvFile) -> Result<()> {
        kv.reject_unknown(SWEEP_KEYS)?;
        let g = self;
        if let Some(v) = kv.list("policies")? {
            g.policies = v;
        }
        if let Some(v) = kv.list("capacity")? {
            g.capacity_fracs = v;
        }
        if let Some(v) = kv.list("gamma")? {
            g.gammas = v;
        }
        if let Some(v) = kv.list("long-reuse")? {
            g.long_reuses = v;
        }
        if let Some(v) = kv.list("tau")? {
            g.taus = v;
        }
        if let Some(v) = parse_alphas(kv)? {
            g.alphas = v;
        }
        if let Some(v) = kv.list("lambda")? {
            g.lambdas = v;
        }
        if let Some(v) = parse_seeds(kv)? {
            g.seeds = v;
        }
        if let Some(v) = kv.parsed("topics")? {
            g.base.n_topics = v;
        }
        if let Some(v) = kv.parsed("sessions")? {
            g.base.sessions_per_topic = v;
        }
        if let Some(v) = kv.parsed("len")? {
            g.base.trace_len = v;
        }
        if let Some(v) = kv.parsed("dim")? {
            g.base.dim = v;
        }
        if let Some(v) = kv.parsed("noise")? {
            g.base.intra_topic_noise = v;
        }
        if let Some(v) = kv.parsed("repeat-fraction")? {
            g.base.repeat_fraction = v;
        }
        if let Some(v) = kv.parsed("tau-edge")? {
            g.tau_edge = v;
        }
        if let Some(v) = kv.parsed("tau-route")? {
            g.tau_route = Some(v);
        }
        if let Some(v) = kv.parsed("exact-keys")? {
            g.exact_keys = v;
        }
        if let Some(v) = kv.parsed("structural-rank")? {
            g.structural_rank = v;
        }
        if let Some(v) = kv.parsed("timing")? {
            g.timing = v;
        }
        g.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("policies", self.policies.len()),
            ("capacity", self.capacity_fracs.len()),
            ("gamma", self.gammas.len()),
            ("long-reuse", self.long_reuses.len()),
            ("tau", self.taus.len()),
            ("alpha", self.alphas.len()),
            ("lambda", self.lambdas.len()),
            ("seeds", self.seeds.len()),
        ];
        for (name, n) in axes {
            if n == 0 {
                return Err(Error::usage(format!("sweep axis '{name}' is empty")));
            }
        }
        for p in &self.policies {
            let (base, _) = split_policy_name(p)?;
            if !POLICY_NAMES.contains(&base) {
                return Err(Error::usage(format!(
                    "unknown policy '{p}'; valid names: {}|rac-notp|rac-notsi",
                    POLICY_NAMES.join("|")
                )));
            }
        }
        Ok(())
    }

    /// Number of rows the sweep will emit.
    pub fn cell_count(&self) -> usize {
        self.cells().len()
    }

    /// One line describing the whole grid, for output headers.
    pub fn describe(&self) -> String {
        let list = |xs: &[f64]| xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let alphas: Vec<String> = self.alphas.iter().map(|a| a.map_or("auto".into(), |x| x.to_string())).collect();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "policies={} capacity={} gamma={} long-reuse={} tau={} alpha={} lambda={} seeds={} topics={} sessions={} len={} dim={} noise={} repeat-fraction={} tau-edge={} tau-route={} exact-keys={} structural-rank={} timing={}",
            self.policies.join(","),
            list(&self.capacity_fracs),
            list(&self.gammas),
            list(&self.long_reuses),
            list(&self.taus),
            alphas.join(","),
            list(&self.lambdas),
            seeds.join(","),
            self.base.n_topics,
            self.base.sessions_per_topic,
            self.base.trace_len,
            self.base.dim,
            self.base.intra_topic_noise,
            self.base.repeat_fraction,
            self.tau_edge,
            self.tau_route.map_or("auto".into(), |x| x.to_string()),
            self.exact_keys,
            self.structural_rank,
            self.timing
        )
    }

    /// Expands the grid. Alpha and lambda only multiply RAC cells.
    fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (pi, p) in self.policies.iter().enumerate() {
            let is_rac = p.starts_with("rac");
            let alphas: Vec<Option<usize>> = if is_rac { (0..self.alphas.len()).map(Some).collect() } else { vec![None] };
            let lambdas: Vec<Option<usize>> = if is_rac { (0..self.lambdas.len()).map(Some).collect() } else { vec![None] };
            for ci in 0..self.capacity_fracs.len() {
                for gi in 0..self.gammas.len() {
                    for li in 0..self.long_reuses.len() {
                        for si in 0..self.seeds.len() {
                            for ti in 0..self.taus.len() {
                                for &ai in &alphas {
                                    for &lj in &lambdas {
                                        out.push(Cell { policy: pi, trace: TraceKey { ci, gi, li, si }, tau: ti, alpha: ai, lambda: lj });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct TraceKey {
    ci: usize,
    gi: usize,
    li: usize,
    si: usize,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    policy: usize,
    trace: TraceKey,
    tau: usize,
    alpha: Option<usize>,
    lambda: Option<usize>,
}

/// Outcome of one simulated cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub hits: u64,
    pub misses: u64,
    pub hr: f64,
    pub hr_norm: f64,
    pub runtime_ms: u128,
    pub capacity: usize,
}

/// One table row. `alpha`/`lambda` are `None` for policies they do not
/// apply to; `alpha` is `Some(None)` for the 1/C default.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub policy: String,
    pub capacity_frac: f64,
    pub gamma: f64,
    pub long_reuse: f64,
    pub tau: f64,
    pub alpha: Option<Option<f64>>,
    pub lambda: Option<f64>,
    pub seed: u64,
    pub outcome: std::result::Result<CellResult, String>,
}

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(&y),
    }
}

impl SweepRow {
    fn sort_cmp(&self, o: &Self) -> Ordering {
        self.policy
            .cmp(&o.policy)
            .then(self.capacity_frac.total_cmp(&o.capacity_frac))
            .then(self.gamma.total_cmp(&o.gamma))
            .then(self.long_reuse.total_cmp(&o.long_reuse))
            .then(self.tau.total_cmp(&o.tau))
            .then_with(|| match (self.alpha, o.alpha) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (Some(a), Some(b)) => cmp_opt(a, b),
            })
            .then(cmp_opt(self.lambda, o.lambda))
            .then(self.seed.cmp(&o.seed))
    }

    pub fn alpha_text(&self) -> String {
        match self.alpha {
            None => String::new(),
            Some(None) => "auto".into(),
            Some(Some(a)) => a.to_string(),
        }
    }

    pub fn lambda_text(&self) -> String {
        self.lambda.map_or_else(String::new, |l| l.to_string())
    }

    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn hr_norm(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.hr_norm)
    }
}

/// Runs the sweep on `jobs` worker threads (all cores when `None`).
pub fn run_sweep(grid: &SweepGrid, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::usage("jobs must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep_inner(grid))
}

struct Prepared {
    key: TraceKey,
    trace: std::result::Result<(Trace, usize), String>,
    /// Per tau index.
    hr_full: Vec<std::result::Result<f64, String>>,
}

fn run_sweep_inner(grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    let mut keys = Vec::new();
    for ci in 0..grid.capacity_fracs.len() {
        for gi in 0..grid.gammas.len() {
            for li in 0..grid.long_reuses.len() {
                for si in 0..grid.seeds.len() {
                    keys.push(TraceKey { ci, gi, li, si });
                }
            }
        }
    }
    let prepared: Vec<Prepared> = keys
        .par_iter()
        .map(|&key| {
            let params = GenParams {
                zipf_gamma: grid.gammas[key.gi],
                long_reuse_target: grid.long_reuses[key.li],
                seed: grid.seeds[key.si],
                ..grid.base.clone()
            };
            let trace = generate_calibrated(&params, grid.capacity_fracs[key.ci]).map_err(|e| e.to_string());
            let hr_full = grid
                .taus
                .iter()
                .map(|&tau| match &trace {
                    Ok((t, _)) => hr_full(t, tau, grid.exact_keys).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                })
                .collect();
            Prepared { key, trace, hr_full }
        })
        .collect();

    let mut rows: Vec<SweepRow> = grid
        .cells()
        .par_iter()
        .map(|cell| {
            let prep = prepared.iter().find(|p| p.key == cell.trace).expect("every trace key prepared");
            run_cell(grid, cell, prep)
        })
        .collect();
    rows.sort_by(SweepRow::sort_cmp);
    Ok(rows)
}

fn run_cell(grid: &SweepGrid, cell: &Cell, prep: &Prepared) -> SweepRow {
    let name = &grid.policies[cell.policy];
    let k = cell.trace;
    let mut row = SweepRow {
        policy: name.clone(),
        capacity_frac: grid.capacity_fracs[k.ci],
        gamma: grid.gammas[k.gi],
        long_reuse: grid.long_reuses[k.li],
        tau: grid.taus[cell.tau],
        alpha: cell.alpha.map(|i| grid.alphas[i]),
        lambda: cell.lambda.map(|i| grid.lambdas[i]),
        seed: grid.seeds[k.si],
        outcome: Err(String::new()),
    };
    row.outcome = simulate_cell(grid, cell, prep, &row);
    row
}

fn simulate_cell(grid: &SweepGrid, cell: &Cell, prep: &Prepared, row: &SweepRow) -> std::result::Result<CellResult, String> {
    let (trace, capacity) = prep.trace.as_ref().map_err(Clone::clone)?;
    let full = prep.hr_full[cell.tau].clone()?;
    let (base, variant) = split_policy_name(&row.policy).map_err(|e| e.to_string())?;
    let mut spec = PolicySpec::new(*capacity);
    spec.seed = row.seed;
    spec.rac.tau = row.tau;
    spec.rac.route_tau = grid.tau_route;
    spec.rac.tsi.tau_edge = grid.tau_edge;
    spec.rac.use_structural_rank = grid.structural_rank;
    if let Some(v) = variant {
        spec.rac.variant = v;
    }
    if let Some(Some(a)) = row.alpha {
        spec.rac.tp.alpha = a;
    }
    if let Some(l) = row.lambda {
        spec.rac.tsi.lambda = l;
    }
    let mut cfg = SimConfig::new(*capacity, row.tau);
    cfg.exact_keys = grid.exact_keys;
    cfg.record_steps = false;
    cfg.hr_full = Some(full);
    let r = run_named(trace, base, &spec, &cfg).map_err(|e| e.to_string())?;
    Ok(CellResult {
        hits: r.hits,
        misses: r.misses,
        hr: r.hr,
        hr_norm: r.hr_norm,
        runtime_ms: if grid.timing { r.runtime_ms } else { 0 },
        capacity: *capacity,
    })
}

/// Renders the table. `header` lines are written first as `# ` comments.
pub fn to_csv(rows: &[SweepRow], header: &[String]) -> Result<String> {
    let mut out = String::new();
    for h in header {
        out.push_str("# ");
        out.push_str(h.trim_start_matches("# "));
        out.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.policy.clone(),
            r.capacity_frac.to_string(),
            r.gamma.to_string(),
            r.long_reuse.to_string(),
            r.tau.to_string(),
            r.alpha_text(),
            r.lambda_text(),
            r.seed.to_string(),
        ];
        match &r.outcome {
            Ok(c) => rec.extend([
                c.hits.to_string(),
                c.misses.to_string(),
                c.hr.to_string(),
                c.hr_norm.to_string(),
                c.runtime_ms.to_string(),
                c.capacity.to_string(),
                "ok".into(),
            ]),
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 6));
                rec.push(format!("failed: {e}"));
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

/// Parses a table written by [`to_csv`]. Comment lines are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse(1, format!("csv header: {e}")))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != CSV_COLUMNS {
        return Err(Error::parse(1, format!("unexpected columns {cols:?}; expected {CSV_COLUMNS:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, format!("csv: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push(parse_row(&rec, line)?);
    }
    Ok(rows)
}

fn parse_row(rec: &csv::StringRecord, line: usize) -> Result<SweepRow> {
    let field = |i: usize| rec.get(i).unwrap_or("");
    fn num<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        s.parse::<T>().map_err(|e| Error::parse(line, format!("bad {what} {s:?}: {e}")))
    }
    let alpha = match field(5) {
        "" => None,
        "auto" => Some(None),
        s => Some(Some(num::<f64>(s, "alpha", line)?)),
    };
    let lambda = match field(6) {
        "" => None,
        s => Some(num::<f64>(s, "lambda", line)?),
    };
    let status = field(14);
    let outcome = if status == "ok" {
        Ok(CellResult {
            hits: num(field(8), "hits", line)?,
            misses: num(field(9), "misses", line)?,
            hr: num(field(10), "hr", line)?,
            hr_norm: num(field(11), "hr_norm", line)?,
            runtime_ms: num(field(12), "runtime_ms", line)?,
            capacity: num(field(13), "capacity", line)?,
        })
    } else if let Some(msg) = status.strip_prefix("failed: ") {
        Err(msg.to_string())
    } else {
        return Err(Error::parse(line, format!("bad status {status:?}")));
    };
    Ok(SweepRow {
        policy: field(0).to_string(),
        capacity_frac: num(field(1), "capacity_frac", line)?,
        gamma: num(field(2), "gamma", line)?,
        long_reuse: num(field(3), "long_reuse", line)?,
        tau: num(field(4), "tau", line)?,
        alpha,
        lambda,
        seed: num(field(7), "seed", line)?,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SweepGrid {
        SweepGrid {
            policies: vec!["lru".into(), "rac".into()],
            seeds: vec![1, 0],
            base: GenParams { n_topics: 6, sessions_per_topic: 4, trace_len: 300, dim: 16, ..GenParams::default() },
            ..SweepGrid::default()
        }
    }

    #[test]
    fn parses_a_sweep_file() {
        let g = SweepGrid::parse("policies=lru, rac-notp\nalpha=auto,0.01\nseeds=0..3\nlen=500\n").unwrap();
        assert_eq!(g.policies, vec!["lru", "rac-notp"]);
        assert_eq!(g.alphas, vec![None, Some(0.01)]);
        assert_eq!(g.seeds, vec![0, 1, 2]);
        assert_eq!(g.base.trace_len, 500);
        // lru ignores alpha: 1 + 2 cells.
        assert_eq!(g.cell_count(), 9);
        assert!(SweepGrid::parse("policies=nosuch").is_err());
        assert!(SweepGrid::parse("seeds=3..3").is_err());
        assert!(SweepGrid::parse("colour=red").is_err());
    }

    #[test]
    fn one_cell_one_row() {
        let g = SweepGrid { policies: vec!["fifo".into()], seeds: vec![0], ..tiny() };
        let rows = run_sweep(&g, Some(1)).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].is_ok(), "{:?}", rows[0].outcome);
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let g = tiny();
        let a = to_csv(&run_sweep(&g, Some(1)).unwrap(), &["h".into()]).unwrap();
        let b = to_csv(&run_sweep(&g, Some(2)).unwrap(), &["h".into()]).unwrap();
        assert_eq!(a, b);
        let rows = parse_csv(&a).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(to_csv(&rows, &["h".into()]).unwrap(), a);
        assert_eq!(rows[0].seed, 0);
    }

    #[test]
    fn failed_cells_are_rows() {
        let g = SweepGrid { gammas: vec![-1.0], ..tiny() };
        let rows = run_sweep(&g, Some(1)).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| !r.is_ok()));
        let text = to_csv(&rows, &[]).unwrap();
        assert_eq!(parse_csv(&text).unwrap(), rows);
    }
}
