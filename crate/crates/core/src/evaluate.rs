//! Full evaluation of a set of runs: commonality, the six baselines and
//! one leaderboard per metric.

use crate::analysis::{leaderboards, CorrelationOptions};
use crate::baselines::baseline_report;
use crate::commonality::commonality_report;
use crate::error::Result;
use crate::ingest::binarize;
use crate::model::{CategoryIndex, EvalConfig, MetricReport, Qrels, RunSet};

/// Evaluates `runs` against graded `qrels`, binarized at the configured
/// threshold. Every run must rank the same users.
pub fn evaluate(
    runs: &[RunSet],
    qrels: &Qrels,
    index: &CategoryIndex,
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    let binary = binarize(qrels, cfg.relevance_threshold)?;
    let mut report = commonality_report(runs, index, cfg)?;
    report.merge(baseline_report(runs, &binary, index, cfg)?)?;
    add_orderings(&mut report, cfg)?;
    Ok(report)
}

/// Fills `orderings` with each metric's leaderboard, best system first.
pub fn add_orderings(report: &mut MetricReport, cfg: &EvalConfig) -> Result<()> {
    let opts = CorrelationOptions {
        aggregation: cfg.aggregation,
        raw_direction: false,
    };
    let (boards, _) = leaderboards(report, opts)?;
    report.orderings = boards
        .into_iter()
        .map(|b| {
            (
                b.metric.clone(),
                b.systems().into_iter().map(String::from).collect(),
            )
        })
        .collect();
    Ok(())
}
