//! Utility, diversity and fairness baselines.
//!
//! Per-user metrics expect binarized qrels (grade > 0 is relevant) and are
//! averaged over users with at least one relevant judgment; the others are
//! skipped and counted.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    CategoryId, CategoryIndex, EvalConfig, ItemId, MetricReport, Qrels, Ranking, ReportRow, RunSet,
};

pub const NDCG: &str = "ndcg";
pub const RR: &str = "rr";
pub const ALPHA_NDCG: &str = "alpha_ndcg";
pub const ERR_IA: &str = "err_ia";
pub const RSP: &str = "rsp";
pub const REO: &str = "reo";

/// Group exposure definitions used by [`rsp`] and [`reo`], echoed in reports.
pub const FAIRNESS_NOTE: &str =
    "rsp/reo: relative std of per-group top-k rates; rsp denominators use full group size";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub system_name: String,
    pub metric_name: String,
    pub value: f64,
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

fn ideal_dcg(num_relevant: usize, k: usize) -> f64 {
    (1..=num_relevant.min(k)).map(discount).sum()
}

/// Binary-gain NDCG@k. Zero when the user has no relevant judgments.
pub fn ndcg(ranking: &Ranking, qrels: &Qrels, k: usize) -> f64 {
    let ideal = ideal_dcg(qrels.num_relevant(&ranking.user), k);
    if ideal == 0.0 {
        return 0.0;
    }
    let dcg: f64 = ranking
        .top(k)
        .iter()
        .enumerate()
        .filter(|(_, item)| qrels.is_relevant(&ranking.user, item))
        .map(|(pos, _)| discount(pos + 1))
        .sum();
    dcg / ideal
}

pub fn reciprocal_rank(ranking: &Ranking, qrels: &Qrels) -> f64 {
    ranking
        .items()
        .iter()
        .position(|item| qrels.is_relevant(&ranking.user, item))
        .map_or(0.0, |pos| 1.0 / (pos + 1) as f64)
}

/// Novelty-discounted gain of placing `item` after `seen[c]` earlier relevant
/// items of each of its categories.
fn alpha_gain(cats: &[usize], seen: &[u32], keep: f64) -> f64 {
    cats.iter().map(|&c| keep.powi(seen[c] as i32)).sum()
}

/// alpha-NDCG@k over the categories of `index`, normalized by a greedily
/// built ideal ranking (ties to the lexicographically smallest item).
pub fn alpha_ndcg(
    ranking: &Ranking,
    qrels: &Qrels,
    index: &CategoryIndex,
    alpha: f64,
    k: usize,
) -> f64 {
    let keep = 1.0 - alpha;
    let mut seen = vec![0u32; index.len()];
    let mut dcg = 0.0;
    for (pos, item) in ranking.top(k).iter().enumerate() {
        if !qrels.is_relevant(&ranking.user, item) {
            continue;
        }
        let cats = index.categories_of(item);
        dcg += alpha_gain(cats, &seen, keep) * discount(pos + 1);
        for &c in cats {
            seen[c] += 1;
        }
    }
    let ideal = greedy_ideal_alpha_dcg(ranking, qrels, index, keep, k);
    if ideal == 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}

fn greedy_ideal_alpha_dcg(
    ranking: &Ranking,
    qrels: &Qrels,
    index: &CategoryIndex,
    keep: f64,
    k: usize,
) -> f64 {
    let mut candidates: Vec<&ItemId> = qrels
        .relevant_items(&ranking.user)
        .into_iter()
        .filter(|i| !index.categories_of(i).is_empty())
        .collect();
    candidates.sort();
    let mut seen = vec![0u32; index.len()];
    let mut ideal = 0.0;
    for rank in 1..=k.min(candidates.len()) {
        let mut best: Option<(usize, f64)> = None;
        for (pos, item) in candidates.iter().enumerate() {
            let g = alpha_gain(index.categories_of(item), &seen, keep);
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((pos, g));
            }
        }
        let (pos, g) = best.expect("candidates remain");
        ideal += g * discount(rank);
        for &c in index.categories_of(candidates[pos]) {
            seen[c] += 1;
        }
        candidates.remove(pos);
    }
    ideal
}

/// Intent-aware ERR@k with uniform intent weights over the categories of
/// `index` and stop probability 1/2 for an item relevant within an intent.
pub fn err_ia(ranking: &Ranking, qrels: &Qrels, index: &CategoryIndex, k: usize) -> f64 {
    let mut not_stopped = vec![1.0; index.len()];
    let mut err = vec![0.0; index.len()];
    for (pos, item) in ranking.top(k).iter().enumerate() {
        if !qrels.is_relevant(&ranking.user, item) {
            continue;
        }
        for &c in index.categories_of(item) {
            err[c] += not_stopped[c] * 0.5 / (pos + 1) as f64;
            not_stopped[c] *= 0.5;
        }
    }
    err.iter().sum::<f64>() / index.len() as f64
}

/// Mean of a per-user metric over users with at least one relevant judgment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UserAverage {
    pub mean: f64,
    pub scored_users: usize,
    pub excluded_users: usize,
}

pub fn mean_over_users(
    run: &RunSet,
    qrels: &Qrels,
    metric: impl Fn(&Ranking) -> f64,
) -> UserAverage {
    let mut sum = 0.0;
    let mut scored = 0;
    for ranking in run.rankings() {
        if qrels.num_relevant(&ranking.user) > 0 {
            sum += metric(ranking);
            scored += 1;
        }
    }
    UserAverage {
        mean: if scored == 0 {
            0.0
        } else {
            sum / scored as f64
        },
        scored_users: scored,
        excluded_users: run.num_users() - scored,
    }
}

/// Population standard deviation over mean.
fn relative_std(values: &[f64], what: &str) -> Result<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 || !mean.is_finite() {
        return Err(Error::Undefined(format!("{what}: mean group rate is zero")));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// Ranking-based statistical parity: relative spread of the rate at which
/// each group's items reach users' top `k`.
pub fn rsp(run: &RunSet, index: &CategoryIndex, k: usize) -> Result<f64> {
    if run.num_users() == 0 {
        return Err(Error::Empty("run"));
    }
    let mut counts = vec![0usize; index.len()];
    for ranking in run.rankings() {
        for item in ranking.top(k) {
            for &c in index.categories_of(item) {
                counts[c] += 1;
            }
        }
    }
    let users = run.num_users() as f64;
    let rates: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(c, &n)| n as f64 / (users * index.items_at(c).len() as f64))
        .collect();
    relative_std(&rates, RSP)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FairnessScore {
    pub value: f64,
    /// Groups left out because no user has a relevant item in them.
    pub excluded_groups: Vec<CategoryId>,
}

/// Ranking-based equal opportunity: relative spread of the rate at which
/// each group's relevant items reach users' top `k`.
pub fn reo(run: &RunSet, qrels: &Qrels, index: &CategoryIndex, k: usize) -> Result<FairnessScore> {
    let mut hits = vec![0usize; index.len()];
    let mut relevant = vec![0usize; index.len()];
    for ranking in run.rankings() {
        let rel = qrels.relevant_items(&ranking.user);
        for item in &rel {
            for &c in index.categories_of(item) {
                relevant[c] += 1;
            }
        }
        for item in ranking.top(k).iter().filter(|i| rel.contains(i)) {
            for &c in index.categories_of(item) {
                hits[c] += 1;
            }
        }
    }
    let mut rates = Vec::new();
    let mut excluded_groups = Vec::new();
    for (c, label) in index.labels().iter().enumerate() {
        if relevant[c] == 0 {
            excluded_groups.push(label.clone());
        } else {
            rates.push(hits[c] as f64 / relevant[c] as f64);
        }
    }
    if rates.is_empty() {
        return Err(Error::Undefined(format!(
            "{REO}: no group has relevant items"
        )));
    }
    Ok(FairnessScore {
        value: relative_std(&rates, REO)?,
        excluded_groups,
    })
}

/// All six baselines for one run. Undefined fairness values are left out of
/// the rows and explained in the returned notes.
fn system_baselines(
    run: &RunSet,
    qrels: &Qrels,
    index: &CategoryIndex,
    cfg: &EvalConfig,
) -> (Vec<ReportRow>, Vec<(String, String)>) {
    let sys = run.system_name();
    let k = cfg.cutoff_k;
    let ndcg_avg = mean_over_users(run, qrels, |r| ndcg(r, qrels, k));
    let rr_avg = mean_over_users(run, qrels, |r| reciprocal_rank(r, qrels));
    let alpha_avg = mean_over_users(run, qrels, |r| alpha_ndcg(r, qrels, index, cfg.alpha, k));
    let err_avg = mean_over_users(run, qrels, |r| err_ia(r, qrels, index, k));
    let mut rows = vec![
        ReportRow::new(sys, NDCG, ndcg_avg.mean),
        ReportRow::new(sys, RR, rr_avg.mean),
        ReportRow::new(sys, ALPHA_NDCG, alpha_avg.mean),
        ReportRow::new(sys, ERR_IA, err_avg.mean),
    ];
    let mut notes = vec![(
        format!("excluded_users.{sys}"),
        ndcg_avg.excluded_users.to_string(),
    )];
    match rsp(run, index, k) {
        Ok(v) => rows.push(ReportRow::new(sys, RSP, v)),
        Err(e) => notes.push((format!("undefined.{sys}.{RSP}"), e.to_string())),
    }
    match reo(run, qrels, index, k) {
        Ok(score) => {
            rows.push(ReportRow::new(sys, REO, score.value));
            if !score.excluded_groups.is_empty() {
                let groups: Vec<&str> = score.excluded_groups.iter().map(|c| c.as_str()).collect();
                notes.push((format!("reo_excluded_groups.{sys}"), groups.join(";")));
            }
        }
        Err(e) => notes.push((format!("undefined.{sys}.{REO}"), e.to_string())),
    }
    (rows, notes)
}

/// Baseline rows for every run; `qrels` must already be binarized.
pub fn baseline_report(
    runs: &[RunSet],
    qrels: &Qrels,
    index: &CategoryIndex,
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    let per_system: Vec<_> = runs
        .par_iter()
        .map(|run| system_baselines(run, qrels, index, cfg))
        .collect();
    let mut report = MetricReport::new();
    report.metadata = cfg.metadata();
    report
        .metadata
        .insert("fairness".into(), FAIRNESS_NOTE.into());
    for (rows, notes) in per_system {
        report.extend(rows)?;
        report.metadata.extend(notes);
    }
    Ok(report)
}
