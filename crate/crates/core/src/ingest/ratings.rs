use std::collections::BTreeMap;
use std::io::BufRead;

use super::{numbered_lines, Interner};
use crate::error::{Error, Result};
use crate::model::{ItemId, Qrels, UserId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rating {
    pub user: UserId,
    pub item: ItemId,
    pub grade: u32,
    pub timestamp: Option<i64>,
}

/// A rating log with at most one rating per (user, item).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawRatings {
    ratings: BTreeMap<(UserId, ItemId), Rating>,
}

impl RawRatings {
    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// Ratings ordered by user, then item.
    pub fn iter(&self) -> impl Iterator<Item = &Rating> {
        self.ratings.values()
    }

    pub fn num_users(&self) -> usize {
        let mut users: Vec<&UserId> = self.ratings.keys().map(|(u, _)| u).collect();
        users.dedup();
        users.len()
    }

    pub fn into_qrels(self) -> Qrels {
        let mut q = Qrels::new();
        for r in self.ratings.into_values() {
            q.set(r.user, r.item, r.grade);
        }
        q
    }
}

/// Parses `user::item::rating::timestamp` lines or their comma-separated
/// equivalent (optionally headed). The separator is detected from the first
/// data line; a later repeat of a (user, item) pair replaces the earlier one.
pub fn parse_ratings(reader: impl BufRead) -> Result<RawRatings> {
    let mut interner = Interner::default();
    let mut out = RawRatings::default();
    let mut sep: Option<&str> = None;
    for line in numbered_lines(reader) {
        let (no, line) = line?;
        let sep = *sep.get_or_insert(if line.contains("::") { "::" } else { "," });
        let fields: Vec<&str> = line.split(sep).map(str::trim).collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::parse(
                no,
                format!(
                    "expected 3 or 4 `{sep}`-separated fields, found {}",
                    fields.len()
                ),
            ));
        }
        let grade = match fields[2].parse::<f64>() {
            Ok(g) if g.fract() == 0.0 && (1.0..=5.0).contains(&g) => g as u32,
            Ok(_) => {
                return Err(Error::parse(
                    no,
                    format!("rating `{}` is not an integer in 1..=5", fields[2]),
                ))
            }
            Err(_) if no == 1 && out.is_empty() && sep == "," => continue,
            Err(_) => {
                return Err(Error::parse(
                    no,
                    format!("rating `{}` is not numeric", fields[2]),
                ))
            }
        };
        let timestamp = match fields.get(3) {
            None | Some(&"") => None,
            Some(t) => Some(
                t.parse::<i64>()
                    .map_err(|_| Error::parse(no, format!("timestamp `{t}` is not an integer")))?,
            ),
        };
        let user = interner.user(fields[0], no)?;
        let item = interner.item(fields[1], no)?;
        out.ratings.insert(
            (user.clone(), item.clone()),
            Rating {
                user,
                item,
                grade,
                timestamp,
            },
        );
    }
    Ok(out)
}
