//! Small random evaluation instances in plain strings and in library types.

use std::collections::{BTreeMap, BTreeSet};

use commoneval::model::{CategoryId, CategoryIndex, ItemId, Qrels, Ranking, RunSet, UserId};
use rand::seq::SliceRandom;
use rand::Rng;

pub struct UserCase {
    pub user: String,
    pub ranking: Vec<String>,
    pub relevant: BTreeSet<String>,
}

pub struct Instance {
    pub users: Vec<UserCase>,
    pub groups: BTreeMap<String, BTreeSet<String>>,
    pub k: usize,
    pub alpha: f64,
}

/// Up to `max_items` items, 1-4 users, 1-4 overlapping groups.
pub fn random_instance(rng: &mut impl Rng, max_items: usize) -> Instance {
    let n_items = rng.random_range(2..=max_items);
    let items: Vec<String> = (0..n_items).map(|i| format!("i{i:02}")).collect();
    let n_groups = rng.random_range(1..=4);
    let mut groups = BTreeMap::new();
    for g in 0..n_groups {
        let mut members: BTreeSet<String> = items
            .iter()
            .filter(|_| rng.random_bool(0.3))
            .cloned()
            .collect();
        if members.is_empty() {
            members.insert(items[rng.random_range(0..n_items)].clone());
        }
        groups.insert(format!("g{g}"), members);
    }
    let users = (0..rng.random_range(1..=4))
        .map(|u| {
            let mut ranking = items.clone();
            ranking.shuffle(rng);
            ranking.truncate(rng.random_range(1..=n_items));
            let relevant = items
                .iter()
                .filter(|_| rng.random_bool(0.25))
                .cloned()
                .collect();
            UserCase {
                user: format!("u{u}"),
                ranking,
                relevant,
            }
        })
        .collect();
    Instance {
        users,
        groups,
        k: rng.random_range(1..=max_items),
        alpha: rng.random_range(0.05..0.95),
    }
}

impl Instance {
    pub fn categories_of(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (label, members) in &self.groups {
            for m in members {
                out.entry(m.clone()).or_default().push(label.clone());
            }
        }
        out
    }

    pub fn labels(&self) -> Vec<String> {
        self.groups.keys().cloned().collect()
    }

    pub fn index(&self) -> CategoryIndex {
        let cats = self
            .groups
            .iter()
            .map(|(l, m)| {
                (
                    CategoryId::new(l).unwrap(),
                    m.iter().map(|i| ItemId::new(i).unwrap()).collect(),
                )
            })
            .collect();
        CategoryIndex::new(cats, None).unwrap()
    }

    pub fn qrels(&self) -> Qrels {
        let mut q = Qrels::new();
        for u in &self.users {
            for i in &u.relevant {
                q.set(UserId::new(&u.user).unwrap(), ItemId::new(i).unwrap(), 1);
            }
        }
        q
    }

    pub fn ranking(&self, u: usize) -> Ranking {
        let c = &self.users[u];
        Ranking::new(
            UserId::new(&c.user).unwrap(),
            c.ranking.iter().map(|i| ItemId::new(i).unwrap()).collect(),
        )
        .unwrap()
    }

    pub fn run(&self) -> RunSet {
        RunSet::from_rankings("sys", (0..self.users.len()).map(|u| self.ranking(u))).unwrap()
    }

    pub fn top_k(&self) -> Vec<Vec<String>> {
        self.users
            .iter()
            .map(|u| u.ranking.iter().take(self.k).cloned().collect())
            .collect()
    }

    pub fn relevant_sets(&self) -> Vec<BTreeSet<String>> {
        self.users.iter().map(|u| u.relevant.clone()).collect()
    }
}
