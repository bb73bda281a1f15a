//! Slow, direct transcriptions of the metric definitions, used as oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// Samples the stop rank and averages recall at the stop. Returns (mean,
/// standard error); the error is floored at one sample's weight, the finest
/// difference the sample mean can show.
pub fn familiarity_mc(
    ranking: &[String],
    category: &BTreeSet<String>,
    gamma: f64,
    persist: bool,
    samples: usize,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let n = ranking.len();
    let mut recall = vec![0.0; n + 1];
    for i in 1..=n {
        recall[i] = ranking[..i]
            .iter()
            .filter(|x| category.contains(*x))
            .count() as f64
            / category.len() as f64;
    }
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        // P(stop = i) = (1 - gamma) gamma^(i-1)
        let u: f64 = rng.random();
        let stop = 1 + ((1.0 - u).ln() / gamma.ln()).floor() as usize;
        let v = if stop <= n {
            recall[stop]
        } else if persist {
            recall[n]
        } else {
            0.0
        };
        sum += v;
        sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sq / m - mean * mean).max(0.0) * m / (m - 1.0);
    (mean, (var / m).sqrt().max(1.0 / m))
}

/// Direct sum over ranks of stop probability times recall.
pub fn familiarity_by_ranks(
    ranking: &[String],
    category: &BTreeSet<String>,
    gamma: f64,
    persist: bool,
) -> f64 {
    let n = ranking.len();
    let recall = |i: usize| {
        ranking[..i]
            .iter()
            .filter(|x| category.contains(*x))
            .count() as f64
            / category.len() as f64
    };
    let mut total = 0.0;
    for i in 1..=n {
        total += (1.0 - gamma) * gamma.powi(i as i32 - 1) * recall(i);
    }
    if persist {
        total += gamma.powi(n as i32) * recall(n);
    }
    total
}

pub fn ndcg(ranking: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    let mut dcg = 0.0;
    for (i, item) in ranking.iter().enumerate().take(k) {
        if relevant.contains(item) {
            dcg += discount(i + 1);
        }
    }
    let mut ideal = 0.0;
    for i in 0..relevant.len().min(k) {
        ideal += discount(i + 1);
    }
    if ideal == 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}

pub fn rr(ranking: &[String], relevant: &BTreeSet<String>) -> f64 {
    for (i, item) in ranking.iter().enumerate() {
        if relevant.contains(item) {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}

/// Gain of `list[pos]` given everything ranked above it, counted afresh.
fn alpha_gain_at(
    list: &[String],
    pos: usize,
    relevant: &BTreeSet<String>,
    cats: &BTreeMap<String, Vec<String>>,
    alpha: f64,
) -> f64 {
    let item = &list[pos];
    if !relevant.contains(item) {
        return 0.0;
    }
    let mut gain = 0.0;
    for c in cats.get(item).into_iter().flatten() {
        let seen = list[..pos]
            .iter()
            .filter(|x| relevant.contains(*x) && cats.get(*x).is_some_and(|cs| cs.contains(c)))
            .count();
        gain += (1.0 - alpha).powi(seen as i32);
    }
    gain
}

pub fn alpha_ndcg(
    ranking: &[String],
    relevant: &BTreeSet<String>,
    cats: &BTreeMap<String, Vec<String>>,
    alpha: f64,
    k: usize,
) -> f64 {
    let top: Vec<String> = ranking.iter().take(k).cloned().collect();
    let dcg: f64 = (0..top.len())
        .map(|p| alpha_gain_at(&top, p, relevant, cats, alpha) * discount(p + 1))
        .sum();
    // Greedy ideal: repeatedly append the remaining relevant item with the
    // largest marginal gain, smallest id first on ties.
    let mut ideal_list: Vec<String> = Vec::new();
    let mut pool: Vec<String> = relevant.iter().cloned().collect();
    let mut ideal = 0.0;
    while ideal_list.len() < k && !pool.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for (i, cand) in pool.iter().enumerate() {
            let mut trial = ideal_list.clone();
            trial.push(cand.clone());
            let g = alpha_gain_at(&trial, trial.len() - 1, relevant, cats, alpha);
            let better = match best {
                None => true,
                Some((bi, bg)) => g > bg || (g == bg && cand < &pool[bi]),
            };
            if better {
                best = Some((i, g));
            }
        }
        let (i, g) = best.unwrap();
        ideal += g * discount(ideal_list.len() + 1);
        ideal_list.push(pool.remove(i));
    }
    if ideal == 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}

pub fn err_ia(
    ranking: &[String],
    relevant: &BTreeSet<String>,
    cats: &BTreeMap<String, Vec<String>>,
    labels: &[String],
    k: usize,
) -> f64 {
    let mut total = 0.0;
    for c in labels {
        let r: Vec<f64> = ranking
            .iter()
            .take(k)
            .map(|x| {
                let in_c = cats.get(x).is_some_and(|cs| cs.contains(c));
                if relevant.contains(x) && in_c {
                    0.5
                } else {
                    0.0
                }
            })
            .collect();
        let mut err = 0.0;
        for i in 0..r.len() {
            let mut p = r[i] / (i + 1) as f64;
            for rj in &r[..i] {
                p *= 1.0 - rj;
            }
            err += p;
        }
        total += err / labels.len() as f64;
    }
    total
}

fn relative_std(values: &[f64]) -> Option<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(var.sqrt() / mean)
}

/// `groups`: label -> member items. `top`: one top-k list per user.
pub fn rsp(top: &[Vec<String>], groups: &BTreeMap<String, BTreeSet<String>>) -> Option<f64> {
    let rates: Vec<f64> = groups
        .values()
        .map(|g| {
            let hits: usize = top
                .iter()
                .map(|t| t.iter().filter(|x| g.contains(*x)).count())
                .sum();
            hits as f64 / (top.len() * g.len()) as f64
        })
        .collect();
    relative_std(&rates)
}

pub fn reo(
    top: &[Vec<String>],
    relevant: &[BTreeSet<String>],
    groups: &BTreeMap<String, BTreeSet<String>>,
) -> Option<f64> {
    let mut rates = Vec::new();
    for g in groups.values() {
        let mut num = 0;
        let mut den = 0;
        for (t, rel) in top.iter().zip(relevant) {
            num += t
                .iter()
                .filter(|x| g.contains(*x) && rel.contains(*x))
                .count();
            den += g.iter().filter(|x| rel.contains(*x)).count();
        }
        if den > 0 {
            rates.push(num as f64 / den as f64);
        }
    }
    if rates.is_empty() {
        None
    } else {
        relative_std(&rates)
    }
}
