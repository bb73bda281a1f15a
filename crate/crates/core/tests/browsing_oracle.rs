mod support;

use std::collections::BTreeSet;

use commoneval::browsing::{familiarity, stop_probability, StopModel};
use commoneval::model::{ItemId, Ranking, TailPolicy, UserId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::reference::{familiarity_by_ranks, familiarity_mc};

const SAMPLES: usize = 1_000_000;

fn to_ranking(items: &[String]) -> Ranking {
    Ranking::new(
        UserId::new("u").unwrap(),
        items.iter().map(|i| ItemId::new(i).unwrap()).collect(),
    )
    .unwrap()
}

fn to_set(items: &BTreeSet<String>) -> BTreeSet<ItemId> {
    items.iter().map(|i| ItemId::new(i).unwrap()).collect()
}

fn policy(persist: bool) -> TailPolicy {
    if persist {
        TailPolicy::PersistBeyondEnd
    } else {
        TailPolicy::PaperLiteral
    }
}

#[test]
fn two_hit_fixture_agrees_with_sampling() {
    let ranking: Vec<String> = ["x1", "c1", "x2", "c2", "x3"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let cat: BTreeSet<String> = ["c1", "c2"].iter().map(|s| s.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for (persist, frozen) in [(false, 0.22401), (true, 0.81450)] {
        let (mean, se) = familiarity_mc(&ranking, &cat, 0.9, persist, SAMPLES, &mut rng);
        assert!(
            (mean - frozen).abs() < 3.0 * se,
            "{mean} +- {se} vs {frozen}"
        );
        let exact = familiarity(
            &to_ranking(&ranking),
            &to_set(&cat),
            &StopModel::new(0.9).unwrap(),
            policy(persist),
        )
        .unwrap();
        assert!((exact - frozen).abs() < 5e-6);
    }
}

#[test]
fn random_instances_agree_with_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.random_range(1..=20);
        let extra = rng.random_range(0..=5);
        let pool: Vec<String> = (0..n + extra).map(|i| format!("i{i}")).collect();
        let ranking = pool[..n].to_vec();
        let size = rng.random_range(1..=5usize.min(pool.len()));
        let cat: BTreeSet<String> = rand::seq::index::sample(&mut rng, pool.len(), size)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect();
        let gamma = rng.random_range(0.1..0.99);
        let persist = case % 2 == 1;
        let model = StopModel::new(gamma).unwrap();
        let exact = familiarity(
            &to_ranking(&ranking),
            &to_set(&cat),
            &model,
            policy(persist),
        )
        .unwrap();
        let (mean, se) = familiarity_mc(&ranking, &cat, gamma, persist, SAMPLES, &mut rng);
        let z = (exact - mean).abs() / se;
        worst = worst.max(z);
        assert!(z < 3.0, "case {case}: {exact} vs {mean} +- {se}");
    }
    println!("largest deviation: {worst:.2} standard errors");
}

#[test]
fn step_form_matches_rank_sum_on_long_rankings() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.random_range(1..=1000);
        let ranking: Vec<String> = (0..n).map(|i| format!("i{i}")).collect();
        let cat: BTreeSet<String> = (0..n + 10)
            .filter(|_| rng.random_bool(0.02))
            .map(|i| format!("i{i}"))
            .chain(["i0".to_string()])
            .collect();
        let gamma = rng.random_range(0.5..0.999);
        for persist in [false, true] {
            let exact = familiarity(
                &to_ranking(&ranking),
                &to_set(&cat),
                &StopModel::new(gamma).unwrap(),
                policy(persist),
            )
            .unwrap();
            let slow = familiarity_by_ranks(&ranking, &cat, gamma, persist);
            assert!((exact - slow).abs() < 1e-12, "{exact} vs {slow}");
        }
    }
}

#[test]
fn stop_probabilities_sum_to_reach() {
    for gamma in [0.5, 0.9, 0.99] {
        let m = StopModel::new(gamma).unwrap();
        for n in [1usize, 5, 50, 500] {
            let total: f64 = (1..=n).map(|i| stop_probability(i, &m).unwrap()).sum();
            assert!((total - (1.0 - gamma.powi(n as i32))).abs() < 1e-12);
        }
    }
}
