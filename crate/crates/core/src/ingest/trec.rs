use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{numbered_lines, Interner};
use crate::error::{Error, Result};
use crate::model::{ItemId, Qrels, Ranking, RunSet, UserId};

struct Entry {
    score: f64,
    rank: i64,
    item: ItemId,
    line: usize,
}

/// Parses a TREC run file (`user Q0 item rank score tag`) into one run per
/// tag, ordered by tag. Within a user, items are ordered by descending score,
/// then ascending rank field, then item id.
pub fn parse_run_file(reader: impl BufRead) -> Result<Vec<RunSet>> {
    let mut interner = Interner::default();
    let mut by_tag: BTreeMap<String, BTreeMap<UserId, Vec<Entry>>> = BTreeMap::new();
    for line in numbered_lines(reader) {
        let (no, line) = line?;
        if line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        let [user, _q0, item, rank, score, tag] = fields[..] else {
            return Err(Error::parse(
                no,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        };
        let rank: i64 = rank
            .parse()
            .map_err(|_| Error::parse(no, format!("rank `{rank}` is not an integer")))?;
        let score: f64 = match score.parse::<f64>() {
            Ok(s) if !s.is_nan() => s,
            _ => return Err(Error::parse(no, format!("score `{score}` is not numeric"))),
        };
        let user = interner.user(user, no)?;
        let item = interner.item(item, no)?;
        let runs = match by_tag.get_mut(tag) {
            Some(r) => r,
            None => by_tag.entry(tag.to_string()).or_default(),
        };
        runs.entry(user).or_default().push(Entry {
            score,
            rank,
            item,
            line: no,
        });
    }

    let mut out = Vec::with_capacity(by_tag.len());
    for (tag, users) in by_tag {
        let mut run = RunSet::new(tag.clone())?;
        for (user, mut entries) in users {
            entries.sort_by(|a, b| a.item.cmp(&b.item).then(a.line.cmp(&b.line)));
            if let Some(w) = entries.windows(2).find(|w| w[0].item == w[1].item) {
                return Err(Error::parse(
                    w[1].line,
                    format!(
                        "duplicate entry for tag {tag}, user {user}, item {}",
                        w[1].item
                    ),
                ));
            }
            entries.sort_by(|a, b| {
                b.score
                    .total_cmp(&a.score)
                    .then(a.rank.cmp(&b.rank))
                    .then_with(|| a.item.cmp(&b.item))
            });
            let items = entries.into_iter().map(|e| e.item).collect();
            run.insert(Ranking::new(user, items)?)?;
        }
        out.push(run);
    }
    Ok(out)
}

/// Writes runs in TREC format. Scores count down from the ranking length so
/// that parsing the output reproduces the same item order. Systems are
/// written in name order.
pub fn write_run_file(runs: &[RunSet], mut out: impl Write) -> Result<()> {
    let mut ordered: Vec<&RunSet> = runs.iter().collect();
    ordered.sort_by(|a, b| a.system_name().cmp(b.system_name()));
    for run in ordered {
        let tag = run.system_name();
        for ranking in run.rankings() {
            let n = ranking.len();
            for (pos, item) in ranking.items().iter().enumerate() {
                writeln!(
                    out,
                    "{} Q0 {} {} {} {}",
                    ranking.user,
                    item,
                    pos + 1,
                    n - pos,
                    tag
                )?;
            }
        }
    }
    Ok(())
}

/// Parses TREC qrels (`user 0 item grade`); a repeated pair keeps its last grade.
pub fn parse_qrels(reader: impl BufRead) -> Result<Qrels> {
    let mut interner = Interner::default();
    let mut qrels = Qrels::new();
    for line in numbered_lines(reader) {
        let (no, line) = line?;
        if line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        let [user, _iter, item, grade] = fields[..] else {
            return Err(Error::parse(
                no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        };
        let grade: u32 = grade.parse().map_err(|_| {
            Error::parse(no, format!("grade `{grade}` is not a non-negative integer"))
        })?;
        qrels.set(interner.user(user, no)?, interner.item(item, no)?, grade);
    }
    Ok(qrels)
}

pub fn write_qrels(qrels: &Qrels, mut out: impl Write) -> Result<()> {
    for (user, item, grade) in qrels.sorted_judgments() {
        writeln!(out, "{user} 0 {item} {grade}")?;
    }
    Ok(())
}
