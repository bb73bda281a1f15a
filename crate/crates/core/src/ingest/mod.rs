//! Readers and writers for run files, qrels, rating logs, category maps,
//! catalogs and metric reports.

mod categories;
mod ratings;
mod report;
mod trec;

use std::collections::HashMap;
use std::io::BufRead;

pub use categories::{parse_catalog, parse_categories, write_catalog, write_categories};
pub use ratings::{parse_ratings, Rating, RawRatings};
pub use report::{format_log, format_sig, read_report, write_report, ReportFormat};
pub use trec::{parse_qrels, parse_run_file, write_qrels, write_run_file};

use crate::error::{Error, Result};
use crate::model::{ItemId, Qrels, UserId};

/// Maps each grade to 1 if it reaches `threshold`, else 0.
pub fn binarize(qrels: &Qrels, threshold: u32) -> Result<Qrels> {
    if threshold < 1 {
        return Err(Error::InvalidParameter {
            name: "relevance threshold",
            value: threshold.to_string(),
            expected: "an integer >= 1",
        });
    }
    Ok(qrels.map_grades(|g| u32::from(g >= threshold)))
}

/// Shares one allocation per distinct token across a whole file.
#[derive(Default)]
pub(crate) struct Interner {
    users: HashMap<String, UserId>,
    items: HashMap<String, ItemId>,
}

impl Interner {
    pub fn user(&mut self, token: &str, line: usize) -> Result<UserId> {
        if let Some(id) = self.users.get(token) {
            return Ok(id.clone());
        }
        let id = UserId::new(token).map_err(|e| Error::parse(line, e.to_string()))?;
        self.users.insert(token.to_string(), id.clone());
        Ok(id)
    }

    pub fn item(&mut self, token: &str, line: usize) -> Result<ItemId> {
        if let Some(id) = self.items.get(token) {
            return Ok(id.clone());
        }
        let id = ItemId::new(token).map_err(|e| Error::parse(line, e.to_string()))?;
        self.items.insert(token.to_string(), id.clone());
        Ok(id)
    }
}

/// Iterates `(line_number, line)` over non-blank lines, trimming line endings.
pub(crate) fn numbered_lines(
    reader: impl BufRead,
) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, line)| {
            line.map(|l| (i + 1, l.trim_end_matches('\r').to_string()))
                .map_err(Error::from)
        })
        .filter(|r| r.as_ref().map_or(true, |(_, l)| !l.trim().is_empty()))
}
