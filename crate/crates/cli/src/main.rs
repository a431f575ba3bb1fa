//! `rac`: generate traces, run single simulations, sweep grids and aggregate
//! results. Exit status 0 on success, 1 on usage errors, 2 on runtime
//! failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rac_core::config::{split_policy_name, KvFile, RunConfig};
use rac_core::gen::generate_trace;
use rac_core::policy::POLICY_NAMES;
use rac_core::report::{plot_csv, summarize, summary_csv, varying_axes};
use rac_core::sim::{run_named, SimConfig};
use rac_core::sweep::{parse_csv, run_sweep, to_csv, CellResult, SweepGrid, SweepRow};
use rac_core::{load_trace, Error, Trace};

const TOOL: &str = "rac";

#[derive(Parser, Debug)]
#[command(name = "rac", version, about = "Relation-aware semantic cache simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic trace.
    Gen(Flags),
    /// Simulate one policy on one trace and emit a result row.
    Run(Flags),
    /// Simulate a parameter grid and emit the result table.
    Sweep(Flags),
    /// Aggregate sweep tables into summary and plot-data CSVs.
    Report(ReportArgs),
}

/// Flags shared by `gen`, `run` and `sweep`. Each overrides the matching
/// key of `--config`.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Input trace (run); a trace is generated from the flags when absent.
    #[arg(long)]
    trace: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    /// Policy name; a comma list for sweep.
    #[arg(long)]
    policy: Option<String>,
    /// Capacity as a fraction of the unique footprint.
    #[arg(long)]
    capacity: Option<f64>,
    /// Absolute capacity in entries.
    #[arg(long)]
    capacity_abs: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Routing gate for RAC; defaults to --tau.
    #[arg(long)]
    tau_route: Option<f64>,
    #[arg(long)]
    tau_edge: Option<f64>,
    /// Decay rate; defaults to 1/C.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Zipf exponent of topic popularity.
    #[arg(long)]
    gamma: Option<f64>,
    /// Target fraction of reuses longer than --capacity-ref.
    #[arg(long)]
    long_reuse: Option<f64>,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    sessions: Option<usize>,
    /// Trace length in requests.
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Intra-topic noise scale.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    repeat_fraction: Option<f64>,
    /// Distance beyond which a reuse counts as long.
    #[arg(long)]
    capacity_ref: Option<usize>,
    #[arg(long)]
    sweep_file: Option<String>,
    /// Sweep worker threads; all cores when absent.
    #[arg(long)]
    jobs: Option<usize>,
    /// Hit on key equality instead of similarity.
    #[arg(long)]
    exact_keys: bool,
    /// Scale RAC values by structural rank.
    #[arg(long)]
    structural_rank: bool,
    /// Record wall-clock runtime (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Sweep CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// Usage errors exit 1, everything else 2.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Usage(_)) { 1 } else { 2 };
        Failure { code, msg: e.to_string() }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure { code: 1, msg: e.to_string() }
}

type CliResult<T> = Result<T, Failure>;

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        macro_rules! put {
            ($field:ident, $key:literal) => {
                if let Some(x) = &self.$field {
                    v.push(($key, x.to_string()));
                }
            };
        }
        put!(seed, "seed");
        put!(trace, "trace");
        put!(out, "out");
        put!(policy, "policy");
        put!(capacity, "capacity");
        put!(capacity_abs, "capacity-abs");
        put!(tau, "tau");
        put!(tau_route, "tau-route");
        put!(tau_edge, "tau-edge");
        put!(alpha, "alpha");
        put!(lambda, "lambda");
        put!(gamma, "gamma");
        put!(long_reuse, "long-reuse");
        put!(topics, "topics");
        put!(sessions, "sessions");
        put!(len, "len");
        put!(dim, "dim");
        put!(noise, "noise");
        put!(repeat_fraction, "repeat-fraction");
        put!(capacity_ref, "capacity-ref");
        put!(sweep_file, "sweep-file");
        put!(jobs, "jobs");
        for (on, key) in [(self.exact_keys, "exact-keys"), (self.structural_rank, "structural-rank"), (self.timing, "timing")] {
            if on {
                v.push((key, "true".into()));
            }
        }
        v
    }

    /// The config file with flags layered on top.
    fn merged(&self) -> CliResult<KvFile> {
        let mut kv = match &self.config {
            Some(p) => KvFile::load(p).map_err(|e| match e {
                Error::Io { .. } => Failure::from(e),
                other => usage(format!("{}: {other}", p.display())),
            })?,
            None => KvFile::default(),
        };
        for (k, v) in self.pairs() {
            kv.set(k, v);
        }
        Ok(kv)
    }

    fn run_config(&self) -> CliResult<(RunConfig, KvFile)> {
        let kv = self.merged()?;
        let mut cfg = RunConfig::default();
        cfg.apply(&kv).map_err(usage)?;
        Ok((cfg, kv))
    }
}

fn write_out(path: Option<&str>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(flags: &Flags) -> CliResult<()> {
    let (cfg, _) = flags.run_config()?;
    let params = cfg.gen_params();
    params.validate().map_err(usage)?;
    let mut trace = generate_trace(&params)?;
    trace.meta.insert(0, cfg.header(TOOL).trim_start_matches("# ").to_string());
    write_out(cfg.out.as_deref(), &trace.to_text())
}

/// `key=value` lookup in the trace's generator meta line.
fn gen_meta(trace: &Trace, key: &str) -> Option<f64> {
    let line = trace.meta.iter().find_map(|m| m.strip_prefix("gen "))?;
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key)?.strip_prefix('='))
        .and_then(|v| v.parse().ok())
}

fn check_policy(name: &str) -> CliResult<()> {
    let (base, _) = split_policy_name(name)?;
    if POLICY_NAMES.contains(&base) {
        Ok(())
    } else {
        Err(usage(format!(
            "unknown policy '{name}'; valid names: {}|rac-notp|rac-notsi",
            POLICY_NAMES.join("|")
        )))
    }
}

fn cmd_run(flags: &Flags) -> CliResult<()> {
    let (cfg, _) = flags.run_config()?;
    check_policy(&cfg.policy)?;
    let trace = match &cfg.trace {
        Some(p) => load_trace(p)?,
        None => {
            let params = cfg.gen_params();
            params.validate().map_err(usage)?;
            generate_trace(&params)?
        }
    };
    let footprint = trace.unique_footprint();
    let capacity = cfg.resolve_capacity(footprint)?;
    let (base, variant) = split_policy_name(&cfg.policy)?;
    let mut spec = cfg.policy_spec(capacity);
    if let Some(v) = variant {
        spec.rac.variant = v;
    }
    let mut sim = SimConfig::new(capacity, cfg.tau);
    sim.exact_keys = cfg.exact_keys;
    sim.record_steps = false;
    let r = run_named(&trace, base, &spec, &sim)?;
    let is_rac = base == "rac";
    let row = SweepRow {
        policy: cfg.policy.clone(),
        capacity_frac: if cfg.capacity_abs.is_some() { capacity as f64 / footprint.max(1) as f64 } else { cfg.capacity },
        gamma: gen_meta(&trace, "gamma").unwrap_or(cfg.gamma),
        long_reuse: gen_meta(&trace, "long_reuse").unwrap_or(cfg.long_reuse),
        tau: cfg.tau,
        alpha: is_rac.then_some(cfg.alpha),
        lambda: is_rac.then_some(cfg.lambda),
        seed: cfg.seed,
        outcome: Ok(CellResult {
            hits: r.hits,
            misses: r.misses,
            hr: r.hr,
            hr_norm: r.hr_norm,
            runtime_ms: if cfg.timing { r.runtime_ms } else { 0 },
            capacity,
        }),
    };
    let header = vec![cfg.header(TOOL), format!("policy: {}", r.config_echo)];
    write_out(cfg.out.as_deref(), &to_csv(&[row], &header)?)
}

/// Run-config keys that map onto sweep axes or generator settings.
const SWEEP_OVERRIDES: &[(&str, &str)] = &[
    ("policy", "policies"),
    ("capacity", "capacity"),
    ("gamma", "gamma"),
    ("long-reuse", "long-reuse"),
    ("tau", "tau"),
    ("alpha", "alpha"),
    ("lambda", "lambda"),
    ("seed", "seeds"),
    ("topics", "topics"),
    ("sessions", "sessions"),
    ("len", "len"),
    ("dim", "dim"),
    ("noise", "noise"),
    ("repeat-fraction", "repeat-fraction"),
    ("tau-edge", "tau-edge"),
    ("tau-route", "tau-route"),
    ("exact-keys", "exact-keys"),
    ("structural-rank", "structural-rank"),
    ("timing", "timing"),
];

fn cmd_sweep(flags: &Flags) -> CliResult<()> {
    let kv = flags.merged()?;
    // Validate every key even though only some feed the grid.
    let mut cfg = RunConfig::default();
    let mut for_cfg = kv.clone();
    // A comma list is valid for sweep but not for a single run.
    if let Some(p) = kv.get("policy") {
        for name in p.split(',') {
            check_policy(name.trim())?;
        }
        for_cfg.set("policy", "rac");
    }
    cfg.apply(&for_cfg).map_err(usage)?;
    if cfg.capacity_abs.is_some() {
        return Err(usage("sweep takes capacity fractions only; use --capacity"));
    }
    let mut grid = match &cfg.sweep_file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            SweepGrid::parse(&text).map_err(|e| usage(format!("{p}: {e}")))?
        }
        None => SweepGrid::default(),
    };
    let mut over = KvFile::default();
    for (from, to) in SWEEP_OVERRIDES {
        if let Some(v) = kv.get(from) {
            over.set(to, v);
        }
    }
    grid.apply(&over).map_err(usage)?;
    let rows = run_sweep(&grid, cfg.jobs)?;
    let seeds: Vec<String> = grid.seeds.iter().map(u64::to_string).collect();
    let header = vec![format!("{TOOL} {} seed={} config: {}", rac_core::VERSION, seeds.join(","), grid.describe())];
    write_out(cfg.out.as_deref(), &to_csv(&rows, &header)?)
}

fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    let mut rows = Vec::new();
    for p in &args.inputs {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        rows.extend(parse_csv(&text).map_err(|e| Failure { code: 2, msg: format!("{}: {e}", p.display()) })?);
    }
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let inputs: Vec<String> = args.inputs.iter().map(|p| p.display().to_string()).collect();
    let header = vec![format!("{TOOL} {} seed=n/a config: report inputs={}", rac_core::VERSION, inputs.join(","))];
    let save = |name: &str, text: String| -> CliResult<()> {
        let path: PathBuf = Path::new(&args.out).join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e).into())
    };
    save("summary.csv", summary_csv(&summarize(&rows), &header))?;
    for axis in varying_axes(&rows) {
        save(&format!("plot_{axis}.csv"), plot_csv(&rows, axis, &header))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Gen(f) => cmd_gen(f),
        Command::Run(f) => cmd_run(f),
        Command::Sweep(f) => cmd_sweep(f),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rac: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
