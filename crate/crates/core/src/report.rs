//! Aggregation of sweep tables into per-cell summaries and plot data.
//!
//! A cell is every column except `seed`; its statistics are taken over the
//! successful rows. Standard deviations are sample deviations (n-1), 0 for a
//! single row.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::sweep::SweepRow;

/// Mean and sample standard deviation; `None` for an empty slice.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

/// Grouping key: the textual form of every non-seed parameter column.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub policy: String,
    pub capacity_frac: String,
    pub gamma: String,
    pub long_reuse: String,
    pub tau: String,
    pub alpha: String,
    pub lambda: String,
}

impl CellKey {
    pub fn of(r: &SweepRow) -> Self {
        Self {
            policy: r.policy.clone(),
            capacity_frac: r.capacity_frac.to_string(),
            gamma: r.gamma.to_string(),
            long_reuse: r.long_reuse.to_string(),
            tau: r.tau.to_string(),
            alpha: r.alpha_text(),
            lambda: r.lambda_text(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub key: CellKey,
    /// Successful rows.
    pub n: usize,
    pub failed: usize,
    pub mean_hr: f64,
    pub mean_hr_norm: f64,
    pub std_hr_norm: f64,
}

/// Per-cell statistics, sorted by key.
pub fn summarize(rows: &[SweepRow]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<CellKey, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry(CellKey::of(r)).or_default();
        match &r.outcome {
            Ok(c) => {
                g.0.push(c.hr);
                g.1.push(c.hr_norm);
            }
            Err(_) => g.2 += 1,
        }
    }
    groups
        .into_iter()
        .map(|(key, (hr, norm, failed))| {
            let (mean_hr_norm, std_hr_norm) = mean_std(&norm).unwrap_or((f64::NAN, f64::NAN));
            let mean_hr = mean_std(&hr).map_or(f64::NAN, |m| m.0);
            CellSummary { key, n: norm.len(), failed, mean_hr, mean_hr_norm, std_hr_norm }
        })
        .collect()
}

pub fn summary_csv(cells: &[CellSummary], header: &[String]) -> String {
    let mut out = comment_block(header);
    out.push_str("policy,capacity_frac,gamma,long_reuse,tau,alpha,lambda,n,failed,mean_hr,mean_hr_norm,std_hr_norm\n");
    for c in cells {
        let k = &c.key;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            k.policy, k.capacity_frac, k.gamma, k.long_reuse, k.tau, k.alpha, k.lambda, c.n, c.failed, c.mean_hr,
            c.mean_hr_norm, c.std_hr_norm
        );
    }
    out
}

/// Sweep axes that get a plot-data file.
pub const PLOT_AXES: &[&str] = &["capacity_frac", "gamma", "long_reuse", "tau", "alpha", "lambda"];

fn axis_value(r: &SweepRow, axis: &str) -> String {
    match axis {
        "capacity_frac" => r.capacity_frac.to_string(),
        "gamma" => r.gamma.to_string(),
        "long_reuse" => r.long_reuse.to_string(),
        "tau" => r.tau.to_string(),
        "alpha" => r.alpha_text(),
        "lambda" => r.lambda_text(),
        other => panic!("unknown plot axis {other}"),
    }
}

/// hr_norm per (policy, axis value), pooled over every other column.
/// Rows sort by policy, then numerically by axis value where possible.
pub fn plot_csv(rows: &[SweepRow], axis: &str, header: &[String]) -> String {
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(v) = r.hr_norm() {
            groups.entry((r.policy.clone(), axis_value(r, axis))).or_default().push(v);
        }
    }
    let mut keyed: Vec<_> = groups.into_iter().collect();
    keyed.sort_by(|((pa, va), _), ((pb, vb), _)| {
        pa.cmp(pb).then_with(|| match (va.parse::<f64>(), vb.parse::<f64>()) {
            (Ok(x), Ok(y)) => x.total_cmp(&y),
            _ => va.cmp(vb),
        })
    });
    let mut out = comment_block(header);
    let _ = writeln!(out, "policy,{axis},n,mean_hr_norm,std_hr_norm");
    for ((policy, value), xs) in keyed {
        let (m, s) = mean_std(&xs).expect("groups are nonempty");
        let _ = writeln!(out, "{policy},{value},{},{m},{s}", xs.len());
    }
    out
}

/// Axes that take more than one value in `rows`.
pub fn varying_axes(rows: &[SweepRow]) -> Vec<&'static str> {
    PLOT_AXES
        .iter()
        .copied()
        .filter(|axis| {
            let mut vals: Vec<String> = rows.iter().map(|r| axis_value(r, axis)).filter(|v| !v.is_empty()).collect();
            vals.sort();
            vals.dedup();
            vals.len() > 1
        })
        .collect()
}

fn comment_block(header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        out.push_str("# ");
        out.push_str(h.trim_start_matches("# "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::CellResult;

    fn row(policy: &str, lr: f64, seed: u64, hr_norm: Option<f64>) -> SweepRow {
        SweepRow {
            policy: policy.into(),
            capacity_frac: 0.1,
            gamma: 0.7,
            long_reuse: lr,
            tau: 0.85,
            alpha: None,
            lambda: None,
            seed,
            outcome: hr_norm
                .map(|h| CellResult { hits: 1, misses: 1, hr: 0.5, hr_norm: h, runtime_ms: 0, capacity: 3 })
                .ok_or_else(|| "boom".to_string()),
        }
    }

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]).unwrap(), (7.0, 0.0));
        assert!(mean_std(&[]).is_none());
    }

    #[test]
    fn groups_by_cell_and_counts_failures() {
        let rows = vec![row("lru", 0.5, 0, Some(0.2)), row("lru", 0.5, 1, Some(0.4)), row("lru", 0.5, 2, None), row("lru", 0.7, 0, Some(0.1))];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].n, s[0].failed), (2, 1));
        assert!((s[0].mean_hr_norm - 0.3).abs() < 1e-15);
        let text = summary_csv(&s, &["hdr".into()]);
        assert!(text.starts_with("# hdr\npolicy,"));
        assert_eq!(varying_axes(&rows), vec!["long_reuse"]);
    }

    #[test]
    fn plot_rows_sort_numerically() {
        let rows = vec![row("a", 0.9, 0, Some(0.1)), row("a", 0.10, 0, Some(0.2))];
        let text = plot_csv(&rows, "long_reuse", &[]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "a,0.1,1,0.2,0");
        assert_eq!(lines[2], "a,0.9,1,0.1,0");
    }
}
