//! Sparse user × item rating matrix with optional timestamps.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::IdMap;

pub const MIN_RATING: f64 = 0.0;
pub const MAX_RATING: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupRule {
    KeepLast,
    #[default]
    KeepMax,
}

impl std::str::FromStr for DedupRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep-last" => Ok(DedupRule::KeepLast),
            "keep-max" => Ok(DedupRule::KeepMax),
            other => Err(Error::Config(format!("unknown dedup rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
    pub timestamp: Option<i64>,
}

/// One parsed line of a ratings file, before ids are resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRating {
    pub user: String,
    pub item: String,
    pub rating: f64,
    pub timestamp: Option<i64>,
}

/// Validated rating store. Entries are sorted by `(user, item)` and unique per
/// pair; `offsets` indexes each user's slice.
#[derive(Debug, Clone)]
pub struct InteractionStore {
    users: IdMap,
    items: IdMap,
    entries: Vec<Interaction>,
    offsets: Vec<usize>,
    duplicates_collapsed: usize,
}

impl PartialEq for InteractionStore {
    fn eq(&self, other: &Self) -> bool {
        self.users == other.users && self.items == other.items && self.entries == other.entries
    }
}

impl InteractionStore {
    /// Builds a store from raw records. Records are processed in order, which
    /// only matters for [`DedupRule::KeepLast`].
    pub fn from_records<I>(records: I, dedup: DedupRule) -> Result<Self>
    where
        I: IntoIterator<Item = RawRating>,
    {
        let records: Vec<RawRating> = records.into_iter().collect();
        for r in &records {
            if !(MIN_RATING..=MAX_RATING).contains(&r.rating) {
                return Err(Error::Range {
                    path: "<records>".into(),
                    line: 0,
                    value: r.rating,
                    min: MIN_RATING,
                    max: MAX_RATING,
                });
            }
        }
        let users = IdMap::from_sorted_names(records.iter().map(|r| r.user.clone()));
        let items = IdMap::from_sorted_names(records.iter().map(|r| r.item.clone()));

        let mut by_pair: HashMap<(usize, usize), Interaction> = HashMap::with_capacity(records.len());
        let mut duplicates = 0;
        for r in &records {
            let user = users.get(&r.user).expect("interned");
            let item = items.get(&r.item).expect("interned");
            let entry = Interaction {
                user,
                item,
                rating: r.rating,
                timestamp: r.timestamp,
            };
            match by_pair.get_mut(&(user, item)) {
                None => {
                    by_pair.insert((user, item), entry);
                }
                Some(existing) => {
                    duplicates += 1;
                    let replace = match dedup {
                        DedupRule::KeepLast => true,
                        DedupRule::KeepMax => entry.rating > existing.rating,
                    };
                    if replace {
                        *existing = entry;
                    }
                }
            }
        }
        let entries: Vec<Interaction> = by_pair.into_values().collect();
        let mut store = Self::assemble(users, items, entries);
        store.duplicates_collapsed = duplicates;
        Ok(store)
    }

    fn assemble(users: IdMap, items: IdMap, mut entries: Vec<Interaction>) -> Self {
        entries.sort_by_key(|e| (e.user, e.item));
        let mut offsets = vec![0; users.len() + 1];
        for e in &entries {
            offsets[e.user + 1] += 1;
        }
        for u in 0..users.len() {
            offsets[u + 1] += offsets[u];
        }
        Self {
            users,
            items,
            entries,
            offsets,
            duplicates_collapsed: 0,
        }
    }

    pub fn users(&self) -> &IdMap {
        &self.users
    }

    pub fn items(&self) -> &IdMap {
        &self.items
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn entries(&self) -> &[Interaction] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of duplicate `(user, item)` lines collapsed during ingestion.
    pub fn duplicates_collapsed(&self) -> usize {
        self.duplicates_collapsed
    }

    pub fn user_entries(&self, user: usize) -> &[Interaction] {
        &self.entries[self.offsets[user]..self.offsets[user + 1]]
    }

    pub fn rating(&self, user: usize, item: usize) -> Option<f64> {
        let row = self.user_entries(user);
        row.binary_search_by_key(&item, |e| e.item)
            .ok()
            .map(|k| row[k].rating)
    }

    /// Sorted item indices rated by `user`.
    pub fn user_items(&self, user: usize) -> Vec<usize> {
        self.user_entries(user).iter().map(|e| e.item).collect()
    }

    /// True when every entry carries a timestamp (and there is at least one).
    pub fn has_timestamps(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.timestamp.is_some())
    }

    /// Keeps the entries accepted by `keep`, preserving both id maps so that
    /// indices stay aligned with `self`.
    pub fn retain<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(&Interaction) -> bool,
    {
        let entries = self.entries.iter().copied().filter(|e| keep(e)).collect();
        Self::assemble(self.users.clone(), self.items.clone(), entries)
    }

    /// Drops users and items that have no entries, re-indexing the rest.
    pub fn compact(&self) -> Self {
        let mut user_used = vec![false; self.num_users()];
        let mut item_used = vec![false; self.num_items()];
        for e in &self.entries {
            user_used[e.user] = true;
            item_used[e.item] = true;
        }
        let users = IdMap::from_sorted_names(
            (0..self.num_users())
                .filter(|&u| user_used[u])
                .map(|u| self.users.name(u).to_owned()),
        );
        let items = IdMap::from_sorted_names(
            (0..self.num_items())
                .filter(|&i| item_used[i])
                .map(|i| self.items.name(i).to_owned()),
        );
        let entries = self
            .entries
            .iter()
            .map(|e| Interaction {
                user: users.get(self.users.name(e.user)).expect("used user"),
                item: items.get(self.items.name(e.item)).expect("used item"),
                ..*e
            })
            .collect();
        Self::assemble(users, items, entries)
    }

    /// Maps ratings linearly from `[from.0, from.1]` onto `[to.0, to.1]`.
    pub fn rescaled(&self, from: (f64, f64), to: (f64, f64)) -> Result<Self> {
        if !(from.0 < from.1 && to.0 < to.1) || to.0 < MIN_RATING || to.1 > MAX_RATING {
            return Err(Error::Config(format!("cannot rescale {from:?} onto {to:?}")));
        }
        if let Some(e) = self.entries.iter().find(|e| !(from.0..=from.1).contains(&e.rating)) {
            return Err(Error::Config(format!("rating {} outside the source scale {from:?}", e.rating)));
        }
        let k = (to.1 - to.0) / (from.1 - from.0);
        let entries = self
            .entries
            .iter()
            .map(|e| Interaction {
                rating: (to.0 + (e.rating - from.0) * k).clamp(to.0, to.1),
                ..*e
            })
            .collect();
        let mut out = Self::assemble(self.users.clone(), self.items.clone(), entries);
        out.duplicates_collapsed = self.duplicates_collapsed;
        Ok(out)
    }

    /// Number of ratings per item.
    pub fn item_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_items()];
        for e in &self.entries {
            counts[e.item] += 1;
        }
        counts
    }

    /// Writes the store in the ratings-file format it was loaded from.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.entries {
            match e.timestamp {
                Some(ts) => writeln!(
                    out,
                    "{} {} {} {}",
                    self.users.name(e.user),
                    self.items.name(e.item),
                    e.rating,
                    ts
                )?,
                None => writeln!(
                    out,
                    "{} {} {}",
                    self.users.name(e.user),
                    self.items.name(e.item),
                    e.rating
                )?,
            }
        }
        Ok(())
    }
}

/// Parses a whitespace-separated ratings file: `user item rating [timestamp]`.
/// Blank lines and lines starting with `#` are ignored.
pub fn load_interactions(path: &Path, dedup: DedupRule) -> Result<InteractionStore> {
    let text = fs::read_to_string(path)?;
    let records = parse_ratings(&text, path)?;
    InteractionStore::from_records(records, dedup)
}

pub fn parse_ratings(text: &str, path: &Path) -> Result<Vec<RawRating>> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(parse_err(format!(
                "expected `user item rating [timestamp]`, found {} field(s)",
                fields.len()
            )));
        }
        if fields.len() > 4 {
            return Err(parse_err(format!("too many fields ({})", fields.len())));
        }
        let rating: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("rating `{}` is not a number", fields[2])))?;
        if !(MIN_RATING..=MAX_RATING).contains(&rating) {
            return Err(Error::Range {
                path: path.to_path_buf(),
                line: line_no,
                value: rating,
                min: MIN_RATING,
                max: MAX_RATING,
            });
        }
        let timestamp = match fields.get(3) {
            None => None,
            Some(raw) => Some(parse_timestamp(raw).ok_or_else(|| {
                parse_err(format!("timestamp `{raw}` is not a number of seconds"))
            })?),
        };
        records.push(RawRating {
            user: fields[0].to_owned(),
            item: fields[1].to_owned(),
            rating,
            timestamp,
        });
    }
    Ok(records)
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    raw.parse::<i64>().ok().or_else(|| {
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(|v| v.floor() as i64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_lines_two_entries() {
        let f = write_tmp("u1 i1 4\nu1 i2 2\n");
        let s = load_interactions(f.path(), DedupRule::KeepMax).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.num_users(), 1);
        assert_eq!(s.num_items(), 2);
        assert_eq!(s.rating(0, 0), Some(4.0));
    }

    #[test]
    fn keep_max_and_keep_last() {
        let f = write_tmp("u1 i1 5\nu1 i1 4\n");
        let max = load_interactions(f.path(), DedupRule::KeepMax).unwrap();
        assert_eq!(max.len(), 1);
        assert_eq!(max.rating(0, 0), Some(5.0));
        assert_eq!(max.duplicates_collapsed(), 1);
        let last = load_interactions(f.path(), DedupRule::KeepLast).unwrap();
        assert_eq!(last.rating(0, 0), Some(4.0));
    }

    #[test]
    fn keep_max_spec_example() {
        let f = write_tmp("u1 i1 4\nu1 i1 5");
        let s = load_interactions(f.path(), DedupRule::KeepMax).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.rating(0, 0), Some(5.0));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let f = write_tmp("# header\nu1 i1 4\nu2 i1 four\n");
        match load_interactions(f.path(), DedupRule::KeepMax) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let f = write_tmp("u1 i1\n");
        assert!(matches!(
            load_interactions(f.path(), DedupRule::KeepMax),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn out_of_range_rating() {
        let f = write_tmp("u1 i1 4\nu1 i2 5.5\n");
        match load_interactions(f.path(), DedupRule::KeepMax) {
            Err(Error::Range { line, value, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(value, 5.5);
            }
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn timestamps_detected() {
        let f = write_tmp("u1 i1 4 100\nu2 i1 3 200\n");
        let s = load_interactions(f.path(), DedupRule::KeepMax).unwrap();
        assert!(s.has_timestamps());
        let f = write_tmp("u1 i1 4 100\nu2 i1 3\n");
        let s = load_interactions(f.path(), DedupRule::KeepMax).unwrap();
        assert!(!s.has_timestamps());
    }

    #[test]
    fn line_order_does_not_change_the_store() {
        let a = write_tmp("u2 i3 1\nu1 i1 4\nu10 i2 2\n");
        let b = write_tmp("u10 i2 2\nu2 i3 1\nu1 i1 4\n");
        let sa = load_interactions(a.path(), DedupRule::KeepMax).unwrap();
        let sb = load_interactions(b.path(), DedupRule::KeepMax).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn compact_drops_unused_ids() {
        let f = write_tmp("u1 i1 4\nu2 i2 1\n");
        let s = load_interactions(f.path(), DedupRule::KeepMax).unwrap();
        let r = s.rescaled((0.0, 5.0), (0.0, 1.0)).unwrap();
        assert!(r.entries().iter().all(|e| (0.0..=1.0).contains(&e.rating)));
        assert!(s.rescaled((1.0, 1.0), (0.0, 1.0)).is_err());
        let kept = s.retain(|e| e.rating >= 2.0);
        assert_eq!(kept.num_users(), 2);
        let c = kept.compact();
        assert_eq!(c.num_users(), 1);
        assert_eq!(c.num_items(), 1);
        assert_eq!(c.users().name(0), "u1");
    }
}
