//! Leaderboards, Kendall rank correlation between them, and per-category
//! breakdowns of commonality.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::baselines::{SystemScore, NDCG, REO, RSP};
use crate::commonality::{COMMONALITY, COMMONALITY_GEOM};
use crate::error::{Error, Result};
use crate::model::{Aggregation, CategoryId, Correlation, MetricReport, ReportRow};

/// Below this many systems the normal approximation to the tau
/// distribution is rough.
pub const APPROXIMATE_P_BELOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    /// Fairness disparities are better when small; everything else when large.
    pub fn of(metric: &str) -> Self {
        match metric {
            RSP | REO => Direction::LowerBetter,
            _ => Direction::HigherBetter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeaderboardEntry {
    pub system: String,
    pub value: f64,
    /// Shares its value with a neighbour; placed by system name.
    pub tied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Leaderboard {
    pub metric: String,
    pub direction: Direction,
    pub entries: Vec<LeaderboardEntry>,
}

impl Leaderboard {
    pub fn systems(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.system.as_str()).collect()
    }

    fn oriented(&self, value: f64) -> f64 {
        match self.direction {
            Direction::HigherBetter => value,
            Direction::LowerBetter => -value,
        }
    }
}

pub fn rank_systems(scores: &[SystemScore], direction: Direction) -> Result<Leaderboard> {
    let mut seen = BTreeSet::new();
    for s in scores {
        if s.value.is_nan() {
            return Err(Error::Undefined(format!(
                "{} is NaN for {}",
                s.metric_name, s.system_name
            )));
        }
        if !seen.insert(s.system_name.as_str()) {
            return Err(Error::DuplicateSystem(s.system_name.clone()));
        }
    }
    let mut entries: Vec<LeaderboardEntry> = scores
        .iter()
        .map(|s| LeaderboardEntry {
            system: s.system_name.clone(),
            value: s.value,
            tied: false,
        })
        .collect();
    entries.sort_by(|a, b| {
        let by_value = match direction {
            Direction::HigherBetter => b.value.total_cmp(&a.value),
            Direction::LowerBetter => a.value.total_cmp(&b.value),
        };
        by_value.then_with(|| a.system.cmp(&b.system))
    });
    for i in 1..entries.len() {
        if entries[i].value == entries[i - 1].value {
            entries[i].tied = true;
            entries[i - 1].tied = true;
        }
    }
    Ok(Leaderboard {
        metric: scores
            .first()
            .map(|s| s.metric_name.clone())
            .unwrap_or_default(),
        direction,
        entries,
    })
}

fn tie_sums(sorted: &[f64]) -> (f64, f64, f64) {
    // (sum t(t-1)/2, sum t(t-1)(t-2), sum t(t-1)(2t+5)) over tie groups of size t
    let mut sums = (0.0, 0.0, 0.0);
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        sums.0 += t * (t - 1.0) / 2.0;
        sums.1 += t * (t - 1.0) * (t - 2.0);
        sums.2 += t * (t - 1.0) * (2.0 * t + 5.0);
    }
    sums
}

/// Counts inversions in `v` while merge-sorting it.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Tie-adjusted Kendall tau-b between paired samples with a two-sided
/// p-value from the normal approximation. O(n log n).
pub fn tau_b(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::MismatchedSystems(format!(
            "{} vs {} values",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Undefined(format!(
            "kendall tau needs at least 2 systems, got {n}"
        )));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Undefined("kendall tau of NaN values".into()));
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (xtie, x0, x1) = tie_sums(&xs);
    let joint: f64 = pairs
        .chunk_by(|a, b| a == b)
        .map(|g| (g.len() * (g.len() - 1) / 2) as f64)
        .sum();
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut ys, &mut Vec::with_capacity(n)) as f64;
    let (ytie, y0, y1) = tie_sums(&ys);

    let total = (n * (n - 1) / 2) as f64;
    if xtie == total || ytie == total {
        return Err(Error::Undefined("kendall tau with all values tied".into()));
    }
    let s = total - xtie - ytie + joint - 2.0 * swaps;
    let tau = (s / ((total - xtie) * (total - ytie)).sqrt()).clamp(-1.0, 1.0);

    let nf = n as f64;
    let m = nf * (nf - 1.0);
    let mut var = (m * (2.0 * nf + 5.0) - x1 - y1) / 18.0 + 2.0 * xtie * ytie / m;
    if n > 2 {
        var += x0 * y0 / (9.0 * m * (nf - 2.0));
    }
    let z = s / var.sqrt();
    let p_value = erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0);
    Ok(Correlation { tau, p_value })
}

/// Correlation between two leaderboards over the same systems, comparing
/// values oriented so that larger is better on both.
pub fn kendall_tau(a: &Leaderboard, b: &Leaderboard) -> Result<Correlation> {
    let b_values: BTreeMap<&str, f64> = b
        .entries
        .iter()
        .map(|e| (e.system.as_str(), b.oriented(e.value)))
        .collect();
    let a_systems: BTreeSet<&str> = a.entries.iter().map(|e| e.system.as_str()).collect();
    if a_systems.len() != b_values.len() || a_systems.iter().any(|s| !b_values.contains_key(s)) {
        let only_a: Vec<&str> = a_systems
            .iter()
            .filter(|s| !b_values.contains_key(*s))
            .copied()
            .collect();
        let only_b: Vec<&str> = b_values
            .keys()
            .filter(|s| !a_systems.contains(*s))
            .copied()
            .collect();
        return Err(Error::MismatchedSystems(format!(
            "leaderboards {} and {} cover different systems (only in first: {only_a:?}; only in second: {only_b:?})",
            a.metric, b.metric
        )));
    }
    let x: Vec<f64> = a.entries.iter().map(|e| a.oriented(e.value)).collect();
    let y: Vec<f64> = a
        .entries
        .iter()
        .map(|e| b_values[e.system.as_str()])
        .collect();
    tau_b(&x, &y)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CorrelationOptions {
    pub aggregation: Aggregation,
    /// Correlate values as reported instead of orienting lower-is-better
    /// metrics.
    pub raw_direction: bool,
}

fn commonality_source(aggregation: Aggregation) -> &'static str {
    match aggregation {
        Aggregation::Arithmetic => COMMONALITY,
        Aggregation::Geometric => COMMONALITY_GEOM,
    }
}

/// The value a leaderboard sorts on: the log value when there is one, so that
/// underflowed probabilities stay distinguishable.
fn sort_value(row: &ReportRow) -> f64 {
    row.log_value.unwrap_or(row.value)
}

/// One leaderboard per system-level metric. Commonality is taken from the
/// chosen aggregate and listed as `commonality`; the other aggregate is left
/// out. Metrics missing for some system are returned separately.
pub fn leaderboards(
    report: &MetricReport,
    opts: CorrelationOptions,
) -> Result<(Vec<Leaderboard>, Vec<String>)> {
    let source = commonality_source(opts.aggregation);
    let mut by_metric: BTreeMap<String, Vec<SystemScore>> = BTreeMap::new();
    for row in report.rows().iter().filter(|r| r.category.is_none()) {
        let metric = match row.metric.as_str() {
            m if m == source => COMMONALITY,
            COMMONALITY | COMMONALITY_GEOM => continue,
            m => m,
        };
        by_metric
            .entry(metric.to_string())
            .or_default()
            .push(SystemScore {
                system_name: row.system.clone(),
                metric_name: metric.to_string(),
                value: sort_value(row),
            });
    }
    let systems = report.systems();
    let mut boards = Vec::new();
    let mut incomplete = Vec::new();
    for (metric, scores) in by_metric {
        if scores.len() != systems.len() {
            incomplete.push(metric);
            continue;
        }
        let direction = if opts.raw_direction {
            Direction::HigherBetter
        } else {
            Direction::of(&metric)
        };
        boards.push(rank_systems(&scores, direction)?);
    }
    Ok((boards, incomplete))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub metrics: Vec<String>,
    pub n_systems: usize,
    /// Symmetric; includes the diagonal.
    pub cells: BTreeMap<(String, String), Correlation>,
    /// Metrics left out because some system lacks a value.
    pub skipped: Vec<String>,
    pub options: CorrelationOptions,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<Correlation> {
        self.cells.get(&(a.to_string(), b.to_string())).copied()
    }

    pub fn p_values_approximate(&self) -> bool {
        self.n_systems < APPROXIMATE_P_BELOW
    }

    /// Metric-by-metric grid of tau with `**` marking p < 0.05.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for m in &self.metrics {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for a in &self.metrics {
            out.push_str(a);
            for b in &self.metrics {
                let c = self.cells[&(a.clone(), b.clone())];
                let mark = if a != b && c.p_value < 0.05 { "**" } else { "" };
                out.push_str(&format!(",{:.4}{mark}", c.tau + 0.0));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Cell<'a> {
            a: &'a str,
            b: &'a str,
            tau: f64,
            p_value: f64,
            significant: bool,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            metrics: &'a [String],
            n_systems: usize,
            direction: &'static str,
            aggregation: String,
            p_values_approximate: bool,
            skipped: &'a [String],
            cells: Vec<Cell<'a>>,
        }
        let doc = Doc {
            metrics: &self.metrics,
            n_systems: self.n_systems,
            direction: if self.options.raw_direction {
                "raw"
            } else {
                "oriented"
            },
            aggregation: self.options.aggregation.to_string(),
            p_values_approximate: self.p_values_approximate(),
            skipped: &self.skipped,
            cells: self
                .cells
                .iter()
                .map(|((a, b), c)| Cell {
                    a,
                    b,
                    tau: c.tau,
                    p_value: c.p_value,
                    significant: a != b && c.p_value < 0.05,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable matrix");
        s.push('\n');
        s
    }
}

pub fn correlation_matrix(
    report: &MetricReport,
    opts: CorrelationOptions,
) -> Result<CorrelationMatrix> {
    let (boards, skipped) = leaderboards(report, opts)?;
    let n_systems = report.systems().len();
    if boards.len() < 2 {
        return Err(Error::Undefined(format!(
            "correlation needs at least 2 metrics with a value for every system, found {}",
            boards.len()
        )));
    }
    if n_systems < 2 {
        return Err(Error::Undefined(format!(
            "correlation needs at least 2 systems, found {n_systems}"
        )));
    }
    let mut cells = BTreeMap::new();
    for (i, a) in boards.iter().enumerate() {
        cells.insert(
            (a.metric.clone(), a.metric.clone()),
            Correlation {
                tau: 1.0,
                p_value: 0.0,
            },
        );
        for b in &boards[i + 1..] {
            let c = kendall_tau(a, b).map_err(|e| match e {
                Error::Undefined(msg) => {
                    Error::Undefined(format!("{} vs {}: {msg}", a.metric, b.metric))
                }
                other => other,
            })?;
            cells.insert((a.metric.clone(), b.metric.clone()), c);
            cells.insert((b.metric.clone(), a.metric.clone()), c);
        }
    }
    Ok(CorrelationMatrix {
        metrics: boards.into_iter().map(|b| b.metric).collect(),
        n_systems,
        cells,
        skipped,
        options: opts,
    })
}

/// One line of a per-category commonality table; `category` is `None` on a
/// system's mean line.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryRow {
    pub system: String,
    pub category: Option<CategoryId>,
    pub log_value: f64,
}

/// Per-category log commonality for `systems` (all systems when empty),
/// ordered by category then system, followed by each system's mean.
pub fn disaggregate(
    report: &MetricReport,
    systems: &[String],
    aggregation: Aggregation,
) -> Result<Vec<CategoryRow>> {
    let known = report.systems();
    let wanted: BTreeSet<&str> = if systems.is_empty() {
        known.clone()
    } else {
        for s in systems {
            if !known.contains(s.as_str()) {
                return Err(Error::UnknownSystem(s.clone()));
            }
        }
        systems.iter().map(String::as_str).collect()
    };
    let source = commonality_source(aggregation);
    let mut per_category = Vec::new();
    let mut means = Vec::new();
    for row in report
        .rows()
        .iter()
        .filter(|r| wanted.contains(r.system.as_str()))
    {
        let Some(log_value) = row.log_value else {
            continue;
        };
        match &row.category {
            Some(c) if row.metric == COMMONALITY => per_category.push(CategoryRow {
                system: row.system.clone(),
                category: Some(c.clone()),
                log_value,
            }),
            None if row.metric == source => means.push(CategoryRow {
                system: row.system.clone(),
                category: None,
                log_value,
            }),
            _ => {}
        }
    }
    for s in &wanted {
        if !means.iter().any(|m| m.system == *s) {
            return Err(Error::Undefined(format!(
                "no {source} rows for system `{s}`"
            )));
        }
    }
    per_category.sort_by(|a, b| {
        a.category
            .cmp(&b.category)
            .then_with(|| a.system.cmp(&b.system))
    });
    means.sort_by(|a, b| a.system.cmp(&b.system));
    per_category.extend(means);
    Ok(per_category)
}

pub fn disaggregate_csv(rows: &[CategoryRow]) -> String {
    let mut out = String::from("system,category,log_value\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.system,
            r.category.as_ref().map_or("", |c| c.as_str()),
            crate::ingest::format_log(r.log_value)
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScatterPoint {
    pub system: String,
    pub ndcg: f64,
    pub commonality_log: f64,
}

/// NDCG against mean log commonality for every system that has both.
pub fn scatter(report: &MetricReport, aggregation: Aggregation) -> Vec<ScatterPoint> {
    let source = commonality_source(aggregation);
    report
        .systems()
        .into_iter()
        .filter_map(|s| {
            let ndcg = report.row(s, NDCG, None)?.value;
            let common = report.row(s, source, None)?;
            Some(ScatterPoint {
                system: s.to_string(),
                ndcg,
                commonality_log: sort_value(common),
            })
        })
        .collect()
}

pub fn scatter_csv(points: &[ScatterPoint]) -> String {
    let mut out = String::from("system,ndcg,commonality_log\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.system,
            crate::ingest::format_sig(p.ndcg),
            crate::ingest::format_log(p.commonality_log)
        ));
    }
    out
}
