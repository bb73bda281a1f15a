//! Seeded synthetic worlds and ranking systems.
//!
//! Items are named by popularity rank (`i0000` is the most popular), so the
//! lexicographic order used for tie-breaking is also popularity order.
//! Randomness for each user comes from its own ChaCha stream derived from
//! the seed, so results do not depend on generation order or thread count.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{CategoryId, CategoryIndex, ItemId, Qrels, Ranking, RunSet, UserId};

pub const RANDOM: &str = "random";
pub const POPULARITY: &str = "popularity";
pub const UTILITY_ORACLE: &str = "utility_oracle";
pub const CATEGORY_ORACLE: &str = "category_oracle";

/// Grade written to qrels for relevant items.
pub const RELEVANT_GRADE: u32 = 5;

/// Which items a category is drawn from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Anywhere in the catalog.
    #[default]
    Uniform,
    /// Among the `2 * category_size` most popular items still available.
    Popular,
    /// Among the less popular half of the catalog.
    LongTail,
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Uniform => "uniform",
            Placement::Popular => "popular",
            Placement::LongTail => "longtail",
        })
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Placement::Uniform),
            "popular" => Ok(Placement::Popular),
            "longtail" => Ok(Placement::LongTail),
            other => Err(Error::InvalidParameter {
                name: "placement",
                value: other.to_string(),
                expected: "uniform, popular or longtail",
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_users: usize,
    pub n_items: usize,
    pub n_categories: usize,
    pub category_size: usize,
    /// Zipf shape: item at popularity rank r has weight r^-exponent.
    pub popularity_exponent: f64,
    /// Fraction of the catalog relevant to each user.
    pub relevance_density: f64,
    /// Let categories share items.
    #[serde(default)]
    pub overlap: bool,
    #[serde(default)]
    pub placement: Placement,
    /// The first this-many categories are drawn from popular items
    /// regardless of `placement`.
    #[serde(default)]
    pub popular_categories: usize,
}

impl SynthSpec {
    /// The desk-scale world: 1000 users, 2000 items, 8 disjoint categories of 25.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            seed,
            n_users: 1000,
            n_items: 2000,
            n_categories: 8,
            category_size: 25,
            popularity_exponent: 1.0,
            relevance_density: 0.01,
            overlap: false,
            placement: Placement::Uniform,
            popular_categories: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_users", self.n_users),
            ("n_items", self.n_items),
            ("n_categories", self.n_categories),
            ("category_size", self.category_size),
        ] {
            if v == 0 {
                return Err(Error::Infeasible(format!("{name} must be at least 1")));
            }
        }
        if !(self.relevance_density > 0.0 && self.relevance_density < 1.0) {
            return Err(Error::InvalidParameter {
                name: "relevance_density",
                value: self.relevance_density.to_string(),
                expected: "a value in (0, 1)",
            });
        }
        if !(self.popularity_exponent >= 0.0 && self.popularity_exponent.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "popularity_exponent",
                value: self.popularity_exponent.to_string(),
                expected: "a finite value >= 0",
            });
        }
        if self.category_size > self.n_items {
            return Err(Error::Infeasible(format!(
                "category_size {} exceeds n_items {}",
                self.category_size, self.n_items
            )));
        }
        if !self.overlap && self.n_categories * self.category_size > self.n_items {
            return Err(Error::Infeasible(format!(
                "{} disjoint categories of {} need more than {} items",
                self.n_categories, self.category_size, self.n_items
            )));
        }
        if self.popular_categories > self.n_categories {
            return Err(Error::Infeasible(format!(
                "popular_categories {} exceeds n_categories {}",
                self.popular_categories, self.n_categories
            )));
        }
        Ok(())
    }

    fn relevant_per_user(&self) -> usize {
        ((self.relevance_density * self.n_items as f64).round() as usize).clamp(1, self.n_items)
    }
}

/// Deterministic RNG for one (purpose, key) pair under a seed.
pub fn substream(seed: u64, tag: &str, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.update([0u8]);
    h.update(key.as_bytes());
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&h.finalize());
    ChaCha8Rng::from_seed(bytes)
}

#[derive(Clone, Debug)]
pub struct SynthWorld {
    pub spec: SynthSpec,
    /// Catalog in popularity-rank order.
    pub items: Vec<ItemId>,
    pub users: Vec<UserId>,
    pub categories: CategoryIndex,
    pub qrels: Qrels,
    /// Number of users each item is relevant to.
    pub popularity: BTreeMap<ItemId, u64>,
    relevant: Vec<BTreeSet<usize>>,
}

fn pad(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(4)
}

pub fn synth_world(spec: &SynthSpec) -> Result<SynthWorld> {
    spec.validate()?;
    let iw = pad(spec.n_items);
    let items: Vec<ItemId> = (0..spec.n_items)
        .map(|i| ItemId::new(format!("i{i:0iw$}")))
        .collect::<Result<_>>()?;
    let uw = pad(spec.n_users);
    let users: Vec<UserId> = (0..spec.n_users)
        .map(|u| UserId::new(format!("u{u:0uw$}")))
        .collect::<Result<_>>()?;

    let ranks: Vec<usize> = (0..spec.n_items).collect();
    let per_user = spec.relevant_per_user();
    let s = spec.popularity_exponent;
    let relevant: Vec<BTreeSet<usize>> = users
        .par_iter()
        .map(|u| {
            let mut rng = substream(spec.seed, "relevance", u.as_str());
            let chosen = ranks
                .choose_multiple_weighted(&mut rng, per_user, |&r| ((r + 1) as f64).powf(-s))
                .map_err(|e| Error::Infeasible(e.to_string()))?;
            Ok(chosen.copied().collect())
        })
        .collect::<Result<_>>()?;

    let mut counts = vec![0u64; spec.n_items];
    let mut qrels = Qrels::new();
    for (u, rel) in users.iter().zip(&relevant) {
        for &i in rel {
            counts[i] += 1;
            qrels.set(u.clone(), items[i].clone(), RELEVANT_GRADE);
        }
    }
    let popularity = items.iter().cloned().zip(counts.iter().copied()).collect();

    let categories = place_categories(spec, &items)?;
    Ok(SynthWorld {
        spec: spec.clone(),
        items,
        users,
        categories,
        qrels,
        popularity,
        relevant,
    })
}

fn place_categories(spec: &SynthSpec, items: &[ItemId]) -> Result<CategoryIndex> {
    let mut rng = substream(spec.seed, "categories", "");
    let mut available: Vec<usize> = (0..spec.n_items).collect();
    let cw = spec.n_categories.saturating_sub(1).to_string().len();
    let mut out = BTreeMap::new();
    for c in 0..spec.n_categories {
        let placement = if c < spec.popular_categories {
            Placement::Popular
        } else {
            spec.placement
        };
        let pool: Vec<usize> = match placement {
            Placement::Uniform => available.clone(),
            Placement::Popular => available
                .iter()
                .copied()
                .take(2 * spec.category_size)
                .collect(),
            Placement::LongTail => available
                .iter()
                .copied()
                .filter(|&i| i >= spec.n_items / 2)
                .collect(),
        };
        if pool.len() < spec.category_size {
            return Err(Error::Infeasible(format!(
                "category {c}: {placement} placement has {} items left, needs {}",
                pool.len(),
                spec.category_size
            )));
        }
        let picked: BTreeSet<usize> = index::sample(&mut rng, pool.len(), spec.category_size)
            .into_iter()
            .map(|p| pool[p])
            .collect();
        if !spec.overlap {
            available.retain(|i| !picked.contains(i));
        }
        out.insert(
            CategoryId::new(format!("c{c:0cw$}"))?,
            picked.into_iter().map(|i| items[i].clone()).collect(),
        );
    }
    CategoryIndex::new(out, Some(items.iter().cloned().collect()))
}

impl SynthWorld {
    pub fn catalog(&self) -> BTreeSet<ItemId> {
        self.items.iter().cloned().collect()
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        if depth == 0 || depth > self.items.len() {
            return Err(Error::InvalidParameter {
                name: "depth",
                value: depth.to_string(),
                expected: "between 1 and the catalog size",
            });
        }
        Ok(())
    }

    fn run_from(&self, name: &str, f: impl Fn(usize) -> Vec<usize> + Sync) -> Result<RunSet> {
        let rankings: Vec<Ranking> = (0..self.users.len())
            .into_par_iter()
            .map(|u| {
                Ranking::new(
                    self.users[u].clone(),
                    f(u).into_iter().map(|i| self.items[i].clone()).collect(),
                )
            })
            .collect::<Result<_>>()?;
        RunSet::from_rankings(name, rankings)
    }

    fn shared_run(&self, name: &str, order: Vec<usize>) -> Result<RunSet> {
        self.run_from(name, |_| order.clone())
    }

    /// Item indices in this user's utility-oracle order.
    fn utility_order(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        let rel = &self.relevant[u];
        rel.iter()
            .copied()
            .chain((0..self.items.len()).filter(move |i| !rel.contains(i)))
    }

    fn random_order(&self, seed: u64, tag: &str, u: usize, depth: usize) -> Vec<usize> {
        let mut rng = substream(seed, tag, self.users[u].as_str());
        let mut perm: Vec<usize> = (0..self.items.len()).collect();
        let (head, _) = perm.partial_shuffle(&mut rng, depth);
        head.to_vec()
    }
}

/// An independent uniformly random ranking for every user.
pub fn random_run(world: &SynthWorld, seed: u64, depth: usize) -> Result<RunSet> {
    world.check_depth(depth)?;
    world.run_from(RANDOM, |u| world.random_order(seed, RANDOM, u, depth))
}

/// The same ranking for every user: most relevant-to-users first.
pub fn popularity_run(world: &SynthWorld, depth: usize) -> Result<RunSet> {
    world.check_depth(depth)?;
    let mut order: Vec<usize> = (0..world.items.len()).collect();
    let counts: Vec<u64> = world.items.iter().map(|i| world.popularity[i]).collect();
    order.sort_by(|&a, &b| {
        counts[b]
            .cmp(&counts[a])
            .then(world.items[a].cmp(&world.items[b]))
    });
    order.truncate(depth);
    world.shared_run(POPULARITY, order)
}

/// Each user's relevant items first, then everything else, both by item id.
pub fn utility_oracle_run(world: &SynthWorld, depth: usize) -> Result<RunSet> {
    world.check_depth(depth)?;
    world.run_from(UTILITY_ORACLE, |u| {
        world.utility_order(u).take(depth).collect()
    })
}

/// Items of `category` first, then the rest, both by item id; shared by all users.
pub fn category_oracle_run(
    world: &SynthWorld,
    depth: usize,
    category: &CategoryId,
) -> Result<RunSet> {
    world.check_depth(depth)?;
    let members = world
        .categories
        .get(category)
        .ok_or_else(|| Error::UnknownCategory(category.to_string()))?;
    let (mut inside, outside): (Vec<usize>, Vec<usize>) =
        (0..world.items.len()).partition(|&i| members.contains(&world.items[i]));
    inside.extend(outside);
    inside.truncate(depth);
    world.shared_run(CATEGORY_ORACLE, inside)
}

/// Interpolates between the utility oracle and a random ranking: each rank
/// is filled from the user's random permutation with probability `noise`,
/// otherwise from the oracle order, skipping items already placed.
pub fn noisy_run(
    world: &SynthWorld,
    seed: u64,
    depth: usize,
    noise: f64,
    name: &str,
) -> Result<RunSet> {
    world.check_depth(depth)?;
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidParameter {
            name: "noise",
            value: noise.to_string(),
            expected: "a value in [0, 1]",
        });
    }
    world.run_from(name, |u| {
        let n = world.items.len();
        let random = world.random_order(seed, name, u, n);
        let mut coin = substream(seed, &format!("{name}/coin"), world.users[u].as_str());
        let mut oracle = world.utility_order(u);
        let mut random = random.into_iter();
        let mut used = HashSet::with_capacity(depth);
        let mut out = Vec::with_capacity(depth);
        while out.len() < depth {
            let next = if coin.random_bool(noise) {
                random.find(|i| !used.contains(i))
            } else {
                oracle.find(|i| !used.contains(i))
            };
            if let Some(i) = next {
                used.insert(i);
                out.push(i);
            }
        }
        out
    })
}

/// Name of the `k`-th noisy system in [`system_family`].
pub fn noisy_name(k: usize) -> String {
    format!("noisy_{k}")
}

/// Noise level of `noisy_k`: k/6 for k in 1..=5.
pub fn family_noise(k: usize) -> f64 {
    k as f64 / 6.0
}

/// Random, popularity, the utility oracle and five noisy interpolations
/// between the oracle and random.
pub fn system_family(world: &SynthWorld, seed: u64, depth: usize) -> Result<Vec<RunSet>> {
    let mut runs = vec![
        random_run(world, seed, depth)?,
        popularity_run(world, depth)?,
        utility_oracle_run(world, depth)?,
    ];
    for k in 1..=5 {
        runs.push(noisy_run(
            world,
            seed,
            depth,
            family_noise(k),
            &noisy_name(k),
        )?);
    }
    Ok(runs)
}
