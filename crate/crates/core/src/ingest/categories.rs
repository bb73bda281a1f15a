use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use super::{numbered_lines, Interner};
use crate::error::{Error, Result};
use crate::model::{CategoryId, CategoryIndex, ItemId};

/// Parses `item<TAB>category` pairs. An item may appear under many categories;
/// repeated pairs collapse.
pub fn parse_categories(reader: impl BufRead) -> Result<CategoryIndex> {
    let mut interner = Interner::default();
    let mut labels: BTreeMap<String, CategoryId> = BTreeMap::new();
    let mut categories: BTreeMap<CategoryId, BTreeSet<ItemId>> = BTreeMap::new();
    for line in numbered_lines(reader) {
        let (no, line) = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        let [item, label] = fields[..] else {
            return Err(Error::parse(
                no,
                format!("expected item<TAB>category, found {} fields", fields.len()),
            ));
        };
        let item = interner.item(item.trim(), no)?;
        let label = match labels.get(label) {
            Some(l) => l.clone(),
            None => {
                let l = CategoryId::new(label).map_err(|e| Error::parse(no, e.to_string()))?;
                labels.insert(label.to_string(), l.clone());
                l
            }
        };
        categories.entry(label).or_default().insert(item);
    }
    CategoryIndex::new(categories, None)
}

/// Writes one `item<TAB>category` line per membership, grouped by category.
pub fn write_categories(index: &CategoryIndex, mut out: impl Write) -> Result<()> {
    for (label, items) in index.iter() {
        for item in items {
            writeln!(out, "{item}\t{label}")?;
        }
    }
    Ok(())
}

/// One item id per line.
pub fn parse_catalog(reader: impl BufRead) -> Result<BTreeSet<ItemId>> {
    let mut catalog = BTreeSet::new();
    for line in numbered_lines(reader) {
        let (no, line) = line?;
        catalog.insert(ItemId::new(line.trim()).map_err(|e| Error::parse(no, e.to_string()))?);
    }
    if catalog.is_empty() {
        return Err(Error::Empty("catalog"));
    }
    Ok(catalog)
}

pub fn write_catalog(catalog: &BTreeSet<ItemId>, mut out: impl Write) -> Result<()> {
    for item in catalog {
        writeln!(out, "{item}")?;
    }
    Ok(())
}
