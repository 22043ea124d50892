//! Rating data ingestion, validation, and train/test splitting.
//!
//! External user/item ids are re-indexed to dense contiguous indexes in
//! first-appearance order, so downstream matrices can be addressed directly.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::error::{Error, Result};

pub const MIN_RATING: f64 = 1.0;
pub const MAX_RATING: f64 = 5.0;

/// Supported on-disk rating formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingsFormat {
    /// `user<TAB>item<TAB>rating<TAB>timestamp`, no header (MovieLens-100k `u.data`).
    MovielensTab,
    /// Comma-separated with exact header `userId,movieId,rating,timestamp`
    /// (MovieLens 20M/25M `ratings.csv`).
    CsvHeader,
}

impl FromStr for RatingsFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "movielens_tab" => Ok(RatingsFormat::MovielensTab),
            "csv_header" => Ok(RatingsFormat::CsvHeader),
            other => Err(Error::InvalidParam {
                name: "format",
                msg: format!("unknown format `{other}` (expected movielens_tab or csv_header)"),
            }),
        }
    }
}

/// Bijection between external ids and dense indexes, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    to_external: Vec<u32>,
    to_dense: HashMap<u32, u32>,
}

impl IdMap {
    fn intern(&mut self, external: u32) -> u32 {
        if let Some(&dense) = self.to_dense.get(&external) {
            return dense;
        }
        let dense = self.to_external.len() as u32;
        self.to_external.push(external);
        self.to_dense.insert(external, dense);
        dense
    }

    pub fn len(&self) -> usize {
        self.to_external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_external.is_empty()
    }

    /// External id for a dense index.
    pub fn external(&self, dense: u32) -> Option<u32> {
        self.to_external.get(dense as usize).copied()
    }

    /// Dense index for an external id.
    pub fn dense(&self, external: u32) -> Option<u32> {
        self.to_dense.get(&external).copied()
    }
}

/// One observed rating, in dense indexes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

/// Sparse observed ratings plus the id maps that define the dense index space.
#[derive(Debug, Clone)]
pub struct RatingsDataset {
    ratings: Vec<Rating>,
    user_ids: IdMap,
    item_ids: IdMap,
}

impl RatingsDataset {
    /// Build a dataset from (external_user, external_item, rating) triples,
    /// interning ids in first-appearance order.
    pub fn from_external(entries: impl IntoIterator<Item = (u32, u32, f64)>) -> Result<Self> {
        let mut user_ids = IdMap::default();
        let mut item_ids = IdMap::default();
        let mut ratings = Vec::new();
        let mut seen = HashSet::new();
        for (ext_user, ext_item, value) in entries {
            check_rating_value(value)
                .map_err(|msg| Error::InvalidData(format!("({ext_user},{ext_item}): {msg}")))?;
            let user = user_ids.intern(ext_user);
            let item = item_ids.intern(ext_item);
            if !seen.insert(pair_key(user, item)) {
                return Err(Error::InvalidData(format!(
                    "duplicate rating for user {ext_user}, item {ext_item}"
                )));
            }
            ratings.push(Rating { user, item, value });
        }
        if ratings.is_empty() {
            return Err(Error::EmptyInput("no ratings".into()));
        }
        Ok(RatingsDataset {
            ratings,
            user_ids,
            item_ids,
        })
    }

    pub(crate) fn from_parts(ratings: Vec<Rating>, user_ids: IdMap, item_ids: IdMap) -> Self {
        RatingsDataset {
            ratings,
            user_ids,
            item_ids,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn user_ids(&self) -> &IdMap {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &IdMap {
        &self.item_ids
    }

    /// Per-user observations as (item, rating), items ascending.
    pub fn items_by_user(&self) -> Vec<Vec<(u32, f64)>> {
        let mut out = vec![Vec::new(); self.n_users()];
        for r in &self.ratings {
            out[r.user as usize].push((r.item, r.value));
        }
        for row in &mut out {
            row.sort_unstable_by_key(|&(item, _)| item);
        }
        out
    }

    /// Per-item observations as (user, rating), users ascending.
    pub fn users_by_item(&self) -> Vec<Vec<(u32, f64)>> {
        let mut out = vec![Vec::new(); self.n_items()];
        for r in &self.ratings {
            out[r.item as usize].push((r.user, r.value));
        }
        for col in &mut out {
            col.sort_unstable_by_key(|&(user, _)| user);
        }
        out
    }

    /// Items the given user has rated, ascending. Linear scan; callers that
    /// need this for every user should use `items_by_user` once instead.
    pub fn observed_items(&self, user: u32) -> Vec<u32> {
        let mut items: Vec<u32> = self
            .ratings
            .iter()
            .filter(|r| r.user == user)
            .map(|r| r.item)
            .collect();
        items.sort_unstable();
        items
    }

    /// Mean of all observed ratings.
    pub fn mean_rating(&self) -> Result<f64> {
        if self.ratings.is_empty() {
            return Err(Error::EmptyInput("mean of empty dataset".into()));
        }
        Ok(self.ratings.iter().map(|r| r.value).sum::<f64>() / self.ratings.len() as f64)
    }

    /// Check every structural invariant: indexes in range, no duplicates,
    /// ratings within bounds, and no empty row or column. Split test halves
    /// are allowed to break the no-empty rule, so this is explicit rather
    /// than enforced on every constructor.
    pub fn validate(&self) -> Result<()> {
        if self.ratings.is_empty() {
            return Err(Error::EmptyInput("dataset has no ratings".into()));
        }
        let n = self.n_users() as u32;
        let m = self.n_items() as u32;
        let mut seen = HashSet::with_capacity(self.ratings.len());
        let mut user_counts = vec![0usize; n as usize];
        let mut item_counts = vec![0usize; m as usize];
        for r in &self.ratings {
            if r.user >= n {
                return Err(Error::IndexOutOfRange {
                    kind: "user",
                    index: r.user as usize,
                    limit: n as usize,
                });
            }
            if r.item >= m {
                return Err(Error::IndexOutOfRange {
                    kind: "item",
                    index: r.item as usize,
                    limit: m as usize,
                });
            }
            check_rating_value(r.value).map_err(Error::InvalidData)?;
            if !seen.insert(pair_key(r.user, r.item)) {
                return Err(Error::InvalidData(format!(
                    "duplicate rating at user {}, item {}",
                    r.user, r.item
                )));
            }
            user_counts[r.user as usize] += 1;
            item_counts[r.item as usize] += 1;
        }
        if let Some(u) = user_counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidData(format!("user {u} has no ratings")));
        }
        if let Some(i) = item_counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidData(format!("item {i} has no ratings")));
        }
        Ok(())
    }
}

fn pair_key(user: u32, item: u32) -> u64 {
    (u64::from(user) << 32) | u64::from(item)
}

fn check_rating_value(value: f64) -> std::result::Result<(), String> {
    if !value.is_finite() {
        return Err(format!("rating {value} is not finite"));
    }
    if !(MIN_RATING..=MAX_RATING).contains(&value) {
        return Err(format!(
            "rating {value} outside [{MIN_RATING}, {MAX_RATING}]"
        ));
    }
    Ok(())
}

/// Parse ratings from a stream in the given format. Timestamps are checked
/// for well-formedness and discarded.
pub fn parse_ratings<R: BufRead>(source: R, format: RatingsFormat) -> Result<RatingsDataset> {
    let mut user_ids = IdMap::default();
    let mut item_ids = IdMap::default();
    let mut ratings = Vec::new();
    let mut seen: HashSet<u64> = HashSet::new();

    let (sep, mut expect_header) = match format {
        RatingsFormat::MovielensTab => ('\t', false),
        RatingsFormat::CsvHeader => (',', true),
    };

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if expect_header {
            if line != "userId,movieId,rating,timestamp" {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!(
                        "expected header `userId,movieId,rating,timestamp`, got `{line}`"
                    ),
                });
            }
            expect_header = false;
            continue;
        }
        let mut fields = line.split(sep);
        let (raw_user, raw_item, raw_rating, raw_ts) = match (
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
        ) {
            (Some(u), Some(i), Some(r), Some(t), None) => (u, i, r, t),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected 4 fields".into(),
                })
            }
        };
        let ext_user: u32 = raw_user.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad user id `{raw_user}`"),
        })?;
        let ext_item: u32 = raw_item.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad item id `{raw_item}`"),
        })?;
        let value: f64 = raw_rating.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad rating `{raw_rating}`"),
        })?;
        check_rating_value(value).map_err(|msg| Error::Parse { line: line_no, msg })?;
        raw_ts.parse::<i64>().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad timestamp `{raw_ts}`"),
        })?;

        let user = user_ids.intern(ext_user);
        let item = item_ids.intern(ext_item);
        if !seen.insert(pair_key(user, item)) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("duplicate rating for user {ext_user}, item {ext_item}"),
            });
        }
        ratings.push(Rating { user, item, value });
    }

    if ratings.is_empty() {
        return Err(Error::EmptyInput("no rating lines in input".into()));
    }
    Ok(RatingsDataset::from_parts(ratings, user_ids, item_ids))
}

pub fn parse_ratings_path(path: impl AsRef<Path>, format: RatingsFormat) -> Result<RatingsDataset> {
    let file = File::open(path)?;
    parse_ratings(BufReader::new(file), format)
}

/// Disjoint train/test halves over a common index space.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: RatingsDataset,
    pub test: RatingsDataset,
}

/// Per-user holdout: move `floor(test_fraction * count)` of each user's
/// ratings to test via seeded sampling (the floor of the f64 product, so
/// e.g. 0.3 of 10 yields 2). A move is skipped, not redrawn, when it would
/// leave a train row or column empty; the procedure is one-pass and
/// deterministic for a given seed.
pub fn split_holdout(ds: &RatingsDataset, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) || test_fraction.is_nan() {
        return Err(Error::InvalidParam {
            name: "test_fraction",
            msg: format!("{test_fraction} not in (0,1)"),
        });
    }

    let n = ds.n_users();
    let mut positions_by_user: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (pos, r) in ds.ratings().iter().enumerate() {
        positions_by_user[r.user as usize].push(pos);
    }

    let mut train_user_counts: Vec<usize> =
        positions_by_user.iter().map(|p| p.len()).collect();
    let mut train_item_counts = vec![0usize; ds.n_items()];
    for r in ds.ratings() {
        train_item_counts[r.item as usize] += 1;
    }

    let mut rng = StdRng::seed_from_u64(seed);
    let mut in_test = vec![false; ds.len()];
    for user in 0..n {
        let positions = &positions_by_user[user];
        let take = (test_fraction * positions.len() as f64).floor() as usize;
        if take == 0 {
            continue;
        }
        let mut chosen = rand::seq::index::sample(&mut rng, positions.len(), take).into_vec();
        chosen.sort_unstable();
        for ci in chosen {
            let pos = positions[ci];
            let item = ds.ratings()[pos].item as usize;
            if train_user_counts[user] <= 1 || train_item_counts[item] <= 1 {
                continue; // would empty a train row or column
            }
            in_test[pos] = true;
            train_user_counts[user] -= 1;
            train_item_counts[item] -= 1;
        }
    }

    let mut train_ratings = Vec::with_capacity(ds.len());
    let mut test_ratings = Vec::new();
    for (pos, r) in ds.ratings().iter().enumerate() {
        if in_test[pos] {
            test_ratings.push(*r);
        } else {
            train_ratings.push(*r);
        }
    }
    let train = RatingsDataset::from_parts(train_ratings, ds.user_ids.clone(), ds.item_ids.clone());
    let test = RatingsDataset::from_parts(test_ratings, ds.user_ids.clone(), ds.item_ids.clone());
    Ok(SplitPair { train, test })
}
