//! Domain types shared by every other module.
//!
//! Identifiers are opaque strings backed by `Arc<str>`, so a run file with
//! millions of lines holds each distinct item token once when parsed through
//! an interner.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(token: impl AsRef<str>) -> Result<Self> {
                let token = token.as_ref();
                if token.is_empty() || token.chars().any(char::is_whitespace) {
                    return Err(Error::InvalidParameter {
                        name: $what,
                        value: format!("{token:?}"),
                        expected: "non-empty token without whitespace",
                    });
                }
                Ok(Self(Arc::from(token)))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:?}", &*self.0)
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;
            fn try_from(s: String) -> Result<Self> {
                Self::new(s)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0.to_string()
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// A catalog item.
    ItemId,
    "item id"
);
string_id!(
    /// A system user.
    UserId,
    "user id"
);

/// Label of an editorially selected category. Labels may contain spaces
/// ("north africa"), but not tabs or line breaks since they travel in TSV.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CategoryId(Arc<str>);

impl CategoryId {
    pub fn new(label: impl AsRef<str>) -> Result<Self> {
        let label = label.as_ref();
        if label.trim().is_empty() || label.contains(['\t', '\n', '\r', ',']) {
            return Err(Error::InvalidParameter {
                name: "category label",
                value: format!("{label:?}"),
                expected: "non-empty label without tabs, commas or line breaks",
            });
        }
        Ok(Self(Arc::from(label)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl TryFrom<String> for CategoryId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl From<CategoryId> for String {
    fn from(id: CategoryId) -> String {
        id.0.to_string()
    }
}

/// One user's ordered item list. Position `i` in `items` is rank `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ranking {
    pub user: UserId,
    items: Vec<ItemId>,
}

impl Ranking {
    /// Duplicates are accepted here and reported by [`validate_runset`].
    pub fn new(user: UserId, items: Vec<ItemId>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyRanking(user.to_string()));
        }
        Ok(Self { user, items })
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The first `k` items, or the whole ranking when `k` exceeds its length.
    pub fn top(&self, k: usize) -> &[ItemId] {
        &self.items[..k.min(self.items.len())]
    }
}

/// A named system's rankings, at most one per user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSet {
    system_name: String,
    rankings: BTreeMap<UserId, Ranking>,
}

impl RunSet {
    pub fn new(system_name: impl Into<String>) -> Result<Self> {
        let system_name = system_name.into();
        if system_name.is_empty() {
            return Err(Error::InvalidParameter {
                name: "system name",
                value: String::new(),
                expected: "non-empty string",
            });
        }
        Ok(Self {
            system_name,
            rankings: BTreeMap::new(),
        })
    }

    pub fn from_rankings(
        system_name: impl Into<String>,
        rankings: impl IntoIterator<Item = Ranking>,
    ) -> Result<Self> {
        let mut run = Self::new(system_name)?;
        for r in rankings {
            run.insert(r)?;
        }
        Ok(run)
    }

    pub fn insert(&mut self, ranking: Ranking) -> Result<()> {
        if self.rankings.contains_key(&ranking.user) {
            return Err(Error::InvalidParameter {
                name: "ranking",
                value: format!("second ranking for user {}", ranking.user),
                expected: "at most one ranking per user",
            });
        }
        self.rankings.insert(ranking.user.clone(), ranking);
        Ok(())
    }

    pub fn system_name(&self) -> &str {
        &self.system_name
    }

    pub fn rankings(&self) -> impl ExactSizeIterator<Item = &Ranking> {
        self.rankings.values()
    }

    pub fn get(&self, user: &UserId) -> Option<&Ranking> {
        self.rankings.get(user)
    }

    pub fn users(&self) -> impl ExactSizeIterator<Item = &UserId> {
        self.rankings.keys()
    }

    pub fn num_users(&self) -> usize {
        self.rankings.len()
    }
}

/// Relevance judgments per (user, item).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<UserId, HashMap<ItemId, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets a grade, replacing any earlier grade for the same pair.
    pub fn set(&mut self, user: UserId, item: ItemId, grade: u32) {
        self.judgments.entry(user).or_default().insert(item, grade);
    }

    pub fn grade(&self, user: &UserId, item: &ItemId) -> Option<u32> {
        self.judgments.get(user)?.get(item).copied()
    }

    pub fn is_relevant(&self, user: &UserId, item: &ItemId) -> bool {
        self.grade(user, item).is_some_and(|g| g > 0)
    }

    pub fn user_judgments(&self, user: &UserId) -> Option<&HashMap<ItemId, u32>> {
        self.judgments.get(user)
    }

    /// Items with a positive grade for `user`.
    pub fn relevant_items(&self, user: &UserId) -> HashSet<&ItemId> {
        self.judgments
            .get(user)
            .map(|m| m.iter().filter(|(_, &g)| g > 0).map(|(i, _)| i).collect())
            .unwrap_or_default()
    }

    pub fn num_relevant(&self, user: &UserId) -> usize {
        self.judgments
            .get(user)
            .map_or(0, |m| m.values().filter(|&&g| g > 0).count())
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.judgments.keys()
    }

    /// All judgments ordered by user, then item.
    pub fn sorted_judgments(&self) -> Vec<(&UserId, &ItemId, u32)> {
        let mut out = Vec::new();
        for (user, items) in &self.judgments {
            let mut items: Vec<_> = items.iter().collect();
            items.sort_by(|a, b| a.0.cmp(b.0));
            out.extend(items.into_iter().map(|(i, &g)| (user, i, g)));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn map_grades(&self, f: impl Fn(u32) -> u32) -> Self {
        let judgments = self
            .judgments
            .iter()
            .map(|(u, items)| {
                let items = items.iter().map(|(i, &g)| (i.clone(), f(g))).collect();
                (u.clone(), items)
            })
            .collect();
        Self { judgments }
    }
}

/// Category label to item set, with an optional catalog and a reverse index
/// from items to the categories containing them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoryIndex {
    categories: BTreeMap<CategoryId, BTreeSet<ItemId>>,
    catalog: Option<BTreeSet<ItemId>>,
    labels: Vec<CategoryId>,
    item_categories: HashMap<ItemId, Vec<usize>>,
}

impl CategoryIndex {
    pub fn new(
        categories: BTreeMap<CategoryId, BTreeSet<ItemId>>,
        catalog: Option<BTreeSet<ItemId>>,
    ) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::NoCategories);
        }
        for (label, items) in &categories {
            if items.is_empty() {
                return Err(Error::EmptyCategory(label.to_string()));
            }
            if let Some(catalog) = &catalog {
                if let Some(item) = items.iter().find(|i| !catalog.contains(*i)) {
                    return Err(Error::InvalidParameter {
                        name: "category item",
                        value: format!("{item} in {label}"),
                        expected: "an item of the catalog",
                    });
                }
            }
        }
        let labels: Vec<CategoryId> = categories.keys().cloned().collect();
        let mut item_categories: HashMap<ItemId, Vec<usize>> = HashMap::new();
        for (pos, items) in categories.values().enumerate() {
            for item in items {
                item_categories.entry(item.clone()).or_default().push(pos);
            }
        }
        Ok(Self {
            categories,
            catalog,
            labels,
            item_categories,
        })
    }

    /// Labels in sorted order; positions in this slice are category indices.
    pub fn labels(&self) -> &[CategoryId] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, label: &CategoryId) -> Option<&BTreeSet<ItemId>> {
        self.categories.get(label)
    }

    pub fn position(&self, label: &CategoryId) -> Option<usize> {
        self.labels.binary_search(label).ok()
    }

    pub fn items_at(&self, pos: usize) -> &BTreeSet<ItemId> {
        &self.categories[&self.labels[pos]]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CategoryId, &BTreeSet<ItemId>)> {
        self.categories.iter()
    }

    /// Indices of the categories containing `item` (empty if none).
    pub fn categories_of(&self, item: &ItemId) -> &[usize] {
        self.item_categories.get(item).map_or(&[], Vec::as_slice)
    }

    pub fn catalog(&self) -> Option<&BTreeSet<ItemId>> {
        self.catalog.as_ref()
    }

    pub fn with_catalog(self, catalog: BTreeSet<ItemId>) -> Result<Self> {
        Self::new(self.categories, Some(catalog))
    }
}

/// How browsing stop mass beyond the last ranked position is treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// Stopping beyond the end of a truncated ranking contributes nothing.
    #[default]
    PaperLiteral,
    /// The user's recall is frozen at the last ranked position.
    PersistBeyondEnd,
}

impl fmt::Display for TailPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailPolicy::PaperLiteral => "literal",
            TailPolicy::PersistBeyondEnd => "persist",
        })
    }
}

impl FromStr for TailPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(TailPolicy::PaperLiteral),
            "persist" => Ok(TailPolicy::PersistBeyondEnd),
            _ => Err(Error::InvalidParameter {
                name: "tail policy",
                value: s.to_string(),
                expected: "literal or persist",
            }),
        }
    }
}

/// How per-category commonality values are averaged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Arithmetic,
    Geometric,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Arithmetic => "arith",
            Aggregation::Geometric => "geom",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arith" => Ok(Aggregation::Arithmetic),
            "geom" => Ok(Aggregation::Geometric),
            _ => Err(Error::InvalidParameter {
                name: "aggregation",
                value: s.to_string(),
                expected: "arith or geom",
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Browsing persistence of the stop model.
    pub gamma: f64,
    /// Evaluation depth for cutoff metrics.
    pub cutoff_k: usize,
    /// Redundancy penalty of alpha-NDCG.
    pub alpha: f64,
    pub tail_policy: TailPolicy,
    /// Minimum raw grade counted as relevant.
    pub relevance_threshold: u32,
    pub aggregation: Aggregation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            cutoff_k: 100,
            alpha: 0.5,
            tail_policy: TailPolicy::PaperLiteral,
            relevance_threshold: 4,
            aggregation: Aggregation::Arithmetic,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value: v.to_string(),
                    expected: "a value in (0, 1)",
                })
            }
        };
        open_unit("gamma", self.gamma)?;
        open_unit("alpha", self.alpha)?;
        if self.cutoff_k == 0 {
            return Err(Error::InvalidParameter {
                name: "cutoff",
                value: "0".into(),
                expected: "a positive integer",
            });
        }
        if self.relevance_threshold == 0 {
            return Err(Error::InvalidParameter {
                name: "relevance threshold",
                value: "0".into(),
                expected: "an integer >= 1",
            });
        }
        Ok(())
    }

    /// Key/value echo of every setting, embedded in report metadata.
    pub fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("gamma".to_string(), self.gamma.to_string()),
            ("cutoff_k".to_string(), self.cutoff_k.to_string()),
            ("alpha".to_string(), self.alpha.to_string()),
            ("tail_policy".to_string(), self.tail_policy.to_string()),
            (
                "relevance_threshold".to_string(),
                self.relevance_threshold.to_string(),
            ),
            ("aggregation".to_string(), self.aggregation.to_string()),
        ])
    }
}

/// One value of a report: a system-level metric when `category` is `None`,
/// otherwise a per-category value.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub system: String,
    pub metric: String,
    pub category: Option<CategoryId>,
    pub value: f64,
    pub log_value: Option<f64>,
}

impl ReportRow {
    pub fn new(system: &str, metric: &str, value: f64) -> Self {
        Self {
            system: system.to_string(),
            metric: metric.to_string(),
            category: None,
            value,
            log_value: None,
        }
    }

    /// Row carrying a natural-log value; the linear value is its exponential.
    pub fn from_log(system: &str, metric: &str, category: Option<CategoryId>, log: f64) -> Self {
        Self {
            system: system.to_string(),
            metric: metric.to_string(),
            category,
            value: log.exp(),
            log_value: Some(log),
        }
    }

    /// The linear value underflowed although the probability is non-zero.
    pub fn underflows(&self) -> bool {
        self.value == 0.0 && self.log_value.is_some_and(f64::is_finite)
    }

    fn key(&self) -> (&str, &str, Option<&CategoryId>) {
        (&self.metric, &self.system, self.category.as_ref())
    }
}

/// Kendall correlation between two metric leaderboards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub tau: f64,
    pub p_value: f64,
}

/// Metric values per system, plus optional leaderboards and correlations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    rows: Vec<ReportRow>,
    pub metadata: BTreeMap<String, String>,
    pub orderings: BTreeMap<String, Vec<String>>,
    pub correlations: BTreeMap<(String, String), Correlation>,
}

impl MetricReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a row; a second value for the same (system, metric, category) slot
    /// is rejected.
    pub fn push(&mut self, row: ReportRow) -> Result<()> {
        if self.rows.iter().any(|r| r.key() == row.key()) {
            return Err(Error::InvalidParameter {
                name: "report row",
                value: format!(
                    "{}/{}/{}",
                    row.system,
                    row.metric,
                    row.category.as_ref().map_or("", |c| c.as_str())
                ),
                expected: "one value per system, metric and category",
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ReportRow>) -> Result<()> {
        rows.into_iter().try_for_each(|r| self.push(r))
    }

    /// Merges another report's rows and metadata into this one.
    pub fn merge(&mut self, other: MetricReport) -> Result<()> {
        self.extend(other.rows)?;
        for (k, v) in other.metadata {
            self.metadata.entry(k).or_insert(v);
        }
        Ok(())
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    /// Rows in (metric, system, category) order.
    pub fn sorted_rows(&self) -> Vec<&ReportRow> {
        let mut rows: Vec<&ReportRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.key().cmp(&b.key()));
        rows
    }

    pub fn systems(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.system.as_str()).collect()
    }

    pub fn row(
        &self,
        system: &str,
        metric: &str,
        category: Option<&CategoryId>,
    ) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.system == system && r.metric == metric && r.category.as_ref() == category)
    }
}

/// A problem found in a run by [`validate_runset`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    DuplicateItem {
        system: String,
        user: UserId,
        item: ItemId,
        rank: usize,
    },
    UnknownItem {
        system: String,
        user: UserId,
        item: ItemId,
        rank: usize,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateItem {
                system,
                user,
                item,
                rank,
            } => {
                write!(
                    f,
                    "{system}: user {user} repeats item {item} at rank {rank}"
                )
            }
            Diagnostic::UnknownItem {
                system,
                user,
                item,
                rank,
            } => {
                write!(
                    f,
                    "{system}: user {user} ranks unknown item {item} at rank {rank}"
                )
            }
        }
    }
}

/// Checks that rankings are duplicate-free and, if a catalog is given, only
/// contain catalog items. An empty result means the run is valid.
pub fn validate_runset(run: &RunSet, catalog: Option<&BTreeSet<ItemId>>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for ranking in run.rankings() {
        let mut seen = HashSet::with_capacity(ranking.len());
        for (pos, item) in ranking.items().iter().enumerate() {
            let rank = pos + 1;
            if !seen.insert(item) {
                out.push(Diagnostic::DuplicateItem {
                    system: run.system_name().to_string(),
                    user: ranking.user.clone(),
                    item: item.clone(),
                    rank,
                });
            }
            if catalog.is_some_and(|c| !c.contains(item)) {
                out.push(Diagnostic::UnknownItem {
                    system: run.system_name().to_string(),
                    user: ranking.user.clone(),
                    item: item.clone(),
                    rank,
                });
            }
        }
    }
    out
}
