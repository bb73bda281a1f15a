//! Population-level commonality: the probability that every user of a run
//! becomes familiar with a category, and its mean over categories.
//!
//! Per-category values are natural logs. Products over thousands of users
//! leave the range of `f64` long before they reach zero, so only the log
//! form is authoritative; linear renderings underflow to `0.0`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::browsing::{log_familiarity, log_familiarity_all, StopModel};
use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;
use crate::model::{
    CategoryId, CategoryIndex, EvalConfig, MetricReport, ReportRow, RunSet, TailPolicy, UserId,
};

pub const COMMONALITY: &str = "commonality";
pub const COMMONALITY_GEOM: &str = "commonality_geom";

#[derive(Clone, Debug, PartialEq)]
pub struct CommonalityResult {
    pub system_name: String,
    /// Natural-log commonality per category; negative infinity when some user
    /// has zero familiarity.
    pub per_category: BTreeMap<CategoryId, f64>,
    pub mean: MeanCommonality,
}

/// Both category averages of commonality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanCommonality {
    /// `ln` of the arithmetic mean of linear commonality values.
    pub arithmetic_log: f64,
    /// Arithmetic mean in linear space; `0.0` when it underflows.
    pub mean_linear: f64,
    /// Mean of log values, i.e. `ln` of the geometric mean.
    pub mean_log: f64,
}

/// Sum over the run's users of their log familiarity with category `label`.
pub fn log_commonality_category(
    run: &RunSet,
    label: &CategoryId,
    index: &CategoryIndex,
    model: &StopModel,
    tail: TailPolicy,
) -> Result<f64> {
    let items = index
        .get(label)
        .ok_or_else(|| Error::UnknownCategory(label.to_string()))?;
    if run.num_users() == 0 {
        return Err(Error::Empty("run"));
    }
    let mut total = 0.0;
    for ranking in run.rankings() {
        total += log_familiarity(ranking, items, model, tail)?;
    }
    Ok(total)
}

/// Log commonality of every category, visiting each ranking once. Users are
/// summed in sorted order, so the result does not depend on how the caller
/// schedules runs across threads.
pub fn log_commonality_all(
    run: &RunSet,
    index: &CategoryIndex,
    model: &StopModel,
    tail: TailPolicy,
) -> Result<BTreeMap<CategoryId, f64>> {
    if run.num_users() == 0 {
        return Err(Error::Empty("run"));
    }
    let mut totals = vec![0.0; index.len()];
    for ranking in run.rankings() {
        let logs = log_familiarity_all(ranking, index, model, tail)?;
        for (t, l) in totals.iter_mut().zip(logs) {
            *t += l;
        }
    }
    Ok(index.labels().iter().cloned().zip(totals).collect())
}

pub fn mean_commonality(per_category: &BTreeMap<CategoryId, f64>) -> Result<MeanCommonality> {
    if per_category.is_empty() {
        return Err(Error::NoCategories);
    }
    let n = per_category.len() as f64;
    let arithmetic_log = log_sum_exp(per_category.values().copied()) - n.ln();
    let mean_log = if per_category.values().any(|v| *v == f64::NEG_INFINITY) {
        f64::NEG_INFINITY
    } else {
        per_category.values().sum::<f64>() / n
    };
    Ok(MeanCommonality {
        arithmetic_log,
        mean_linear: arithmetic_log.exp(),
        mean_log,
    })
}

pub fn commonality(
    run: &RunSet,
    index: &CategoryIndex,
    model: &StopModel,
    tail: TailPolicy,
) -> Result<CommonalityResult> {
    let per_category = log_commonality_all(run, index, model, tail)?;
    let mean = mean_commonality(&per_category)?;
    Ok(CommonalityResult {
        system_name: run.system_name().to_string(),
        per_category,
        mean,
    })
}

/// Every run must rank exactly the same users: a user missing from one run
/// would otherwise silently change the population being compared.
pub fn check_population(runs: &[RunSet]) -> Result<BTreeSet<UserId>> {
    let population: BTreeSet<UserId> = runs.iter().flat_map(|r| r.users().cloned()).collect();
    for run in runs {
        if run.num_users() != population.len() {
            let missing = population
                .iter()
                .find(|u| run.get(u).is_none())
                .expect("population is a superset");
            return Err(Error::MissingRanking {
                system: run.system_name().to_string(),
                user: missing.to_string(),
            });
        }
    }
    Ok(population)
}

/// Rows for every (system, category) plus the arithmetic (`commonality`) and
/// geometric (`commonality_geom`) means per system.
pub fn commonality_rows(result: &CommonalityResult) -> Vec<ReportRow> {
    let sys = &result.system_name;
    let mut rows: Vec<ReportRow> = result
        .per_category
        .iter()
        .map(|(c, &v)| ReportRow::from_log(sys, COMMONALITY, Some(c.clone()), v))
        .collect();
    rows.push(ReportRow::from_log(
        sys,
        COMMONALITY,
        None,
        result.mean.arithmetic_log,
    ));
    rows.push(ReportRow::from_log(
        sys,
        COMMONALITY_GEOM,
        None,
        result.mean.mean_log,
    ));
    rows
}

pub fn commonality_report(
    runs: &[RunSet],
    index: &CategoryIndex,
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    check_population(runs)?;
    let model = StopModel::new(cfg.gamma)?;
    let results: Vec<CommonalityResult> = runs
        .par_iter()
        .map(|run| commonality(run, index, &model, cfg.tail_policy))
        .collect::<Result<_>>()?;
    let mut report = MetricReport::new();
    for result in &results {
        report.extend(commonality_rows(result))?;
    }
    report.metadata = cfg.metadata();
    Ok(report)
}
