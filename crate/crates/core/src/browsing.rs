//! Rank-biased browsing model and per-user familiarity with a category.
//!
//! A user stops at rank `i` with probability `(1 - gamma) * gamma^(i - 1)`.
//! Familiarity is the expected category recall at the stop rank. Summing the
//! stop mass from each category hit to the end of the ranking turns the
//! O(N) sum over ranks into a sum over hits:
//!
//! ```text
//! familiarity = sum over hit ranks j of (gamma^(j-1) - tail) / |c|
//! ```
//!
//! where `tail` is `gamma^N` when stopping past the end is worth nothing and
//! `0` when recall persists beyond the last ranked position.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::logspace::{ln_one_minus_exp, LogSumExp};
use crate::model::{CategoryIndex, ItemId, Ranking, TailPolicy};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopModel {
    gamma: f64,
}

impl StopModel {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma < 1.0 {
            Ok(Self { gamma })
        } else {
            Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma.to_string(),
                expected: "a value in (0, 1)",
            })
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `gamma^(rank - 1)`: probability of reaching `rank`.
    fn reach(&self, rank: usize) -> f64 {
        powi(self.gamma, rank - 1)
    }

    fn tail(&self, len: usize, policy: TailPolicy) -> f64 {
        match policy {
            TailPolicy::PaperLiteral => powi(self.gamma, len),
            TailPolicy::PersistBeyondEnd => 0.0,
        }
    }

    /// Natural log of the stop mass from `rank` through the end of a ranking
    /// of length `len`.
    fn log_hit_term(&self, rank: usize, len: usize, policy: TailPolicy) -> f64 {
        let ln_gamma = self.gamma.ln();
        let reach = (rank - 1) as f64 * ln_gamma;
        match policy {
            TailPolicy::PersistBeyondEnd => reach,
            TailPolicy::PaperLiteral => {
                reach + ln_one_minus_exp((len - rank + 1) as f64 * ln_gamma)
            }
        }
    }
}

fn powi(base: f64, exp: usize) -> f64 {
    match i32::try_from(exp) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(exp as f64),
    }
}

/// Probability that the user stops at 1-based `rank`.
pub fn stop_probability(rank: usize, model: &StopModel) -> Result<f64> {
    if rank < 1 {
        return Err(Error::InvalidRank(rank));
    }
    Ok((1.0 - model.gamma) * model.reach(rank))
}

fn check_category(category: &BTreeSet<ItemId>) -> Result<()> {
    if category.is_empty() {
        Err(Error::EmptyCategory("<anonymous>".into()))
    } else {
        Ok(())
    }
}

/// Fraction of the category found in the top `k` of the ranking.
pub fn recall_at(ranking: &Ranking, k: usize, category: &BTreeSet<ItemId>) -> Result<f64> {
    check_category(category)?;
    if k < 1 {
        return Err(Error::InvalidRank(k));
    }
    let hits = ranking
        .top(k)
        .iter()
        .filter(|i| category.contains(*i))
        .count();
    Ok(hits as f64 / category.len() as f64)
}

fn hit_ranks<'a>(
    ranking: &'a Ranking,
    category: &'a BTreeSet<ItemId>,
) -> impl Iterator<Item = usize> + 'a {
    ranking
        .items()
        .iter()
        .enumerate()
        .filter(|(_, item)| category.contains(*item))
        .map(|(pos, _)| pos + 1)
}

/// Probability that the user becomes familiar with `category` after browsing
/// `ranking`, in `[0, 1]`.
pub fn familiarity(
    ranking: &Ranking,
    category: &BTreeSet<ItemId>,
    model: &StopModel,
    tail: TailPolicy,
) -> Result<f64> {
    check_category(category)?;
    if ranking.is_empty() {
        return Err(Error::EmptyRanking(ranking.user.to_string()));
    }
    let t = model.tail(ranking.len(), tail);
    let sum: f64 = hit_ranks(ranking, category)
        .map(|j| model.reach(j) - t)
        .sum();
    Ok((sum / category.len() as f64).clamp(0.0, 1.0))
}

/// Natural log of [`familiarity`], negative infinity when it is zero.
///
/// Hit terms are combined with log-sum-exp, so hits deep in long rankings
/// stay finite even where `gamma^(j-1)` underflows.
pub fn log_familiarity(
    ranking: &Ranking,
    category: &BTreeSet<ItemId>,
    model: &StopModel,
    tail: TailPolicy,
) -> Result<f64> {
    check_category(category)?;
    if ranking.is_empty() {
        return Err(Error::EmptyRanking(ranking.user.to_string()));
    }
    let len = ranking.len();
    let mut acc = LogSumExp::new();
    for j in hit_ranks(ranking, category) {
        acc.push(model.log_hit_term(j, len, tail));
    }
    Ok(finish_log(acc, category.len()))
}

fn finish_log(acc: LogSumExp, category_size: usize) -> f64 {
    let v = acc.value() - (category_size as f64).ln();
    if v > 0.0 {
        0.0
    } else {
        v
    }
}

/// Log familiarity of one ranking with every category of `index`, in a single
/// pass over the ranking. Entry `p` belongs to `index.labels()[p]`.
pub fn log_familiarity_all(
    ranking: &Ranking,
    index: &CategoryIndex,
    model: &StopModel,
    tail: TailPolicy,
) -> Result<Vec<f64>> {
    if ranking.is_empty() {
        return Err(Error::EmptyRanking(ranking.user.to_string()));
    }
    let len = ranking.len();
    let mut acc = vec![LogSumExp::new(); index.len()];
    for (pos, item) in ranking.items().iter().enumerate() {
        let cats = index.categories_of(item);
        if cats.is_empty() {
            continue;
        }
        let term = model.log_hit_term(pos + 1, len, tail);
        for &c in cats {
            acc[c].push(term);
        }
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(c, a)| finish_log(a, index.items_at(c).len()))
        .collect())
}
