//! User-based neighbourhood scoring and top-K selection.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureMatrix, InteractionStore};

pub const DEFAULT_NEIGHBORS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Euclidean,
    Jaccard,
    Cosine,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Euclidean, Metric::Jaccard, Metric::Cosine];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Jaccard => "jaccard",
            Metric::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "jaccard" => Ok(Metric::Jaccard),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::Config(format!("unknown similarity metric `{other}`"))),
        }
    }
}

/// What Jaccard compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JaccardBasis {
    /// The users' rated-item sets.
    ItemSets,
    /// The index sets of nonzero feature components.
    NonzeroFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityConfig {
    pub metric: Metric,
    pub neighbors: usize,
    pub jaccard_basis: JaccardBasis,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Cosine,
            neighbors: DEFAULT_NEIGHBORS,
            jaccard_basis: JaccardBasis::ItemSets,
        }
    }
}

fn same_dim(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() == y.len() {
        Ok(())
    } else {
        Err(Error::Config(format!("vector dimensions differ: {} vs {}", x.len(), y.len())))
    }
}

/// `1 / (1 + ‖x − y‖₂)`.
pub fn euclidean_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    same_dim(x, y)?;
    let d = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(1.0 / (1.0 + d))
}

pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    same_dim(x, y)?;
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::UndefinedSimilarity("cosine with a zero vector"));
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

/// `|A ∩ B| / |A ∪ B|` on sorted, deduplicated index sets.
pub fn jaccard_similarity(a: &[usize], b: &[usize]) -> Result<f64> {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        return Err(Error::UndefinedSimilarity("jaccard of two empty sets"));
    }
    Ok(inter as f64 / union as f64)
}

/// Per-row inputs for the configured metric.
pub struct SimilaritySpace<'a> {
    features: &'a FeatureMatrix,
    sets: Option<Vec<Vec<usize>>>,
    norms: Vec<f64>,
    cfg: SimilarityConfig,
}

impl<'a> SimilaritySpace<'a> {
    /// `store` supplies item sets for item-set Jaccard; feature rows are
    /// matched to store users by id.
    pub fn new(features: &'a FeatureMatrix, store: &InteractionStore, cfg: SimilarityConfig) -> Result<Self> {
        if cfg.neighbors < 1 {
            return Err(Error::Config("neighbourhood size must be at least 1".into()));
        }
        let sets = match (cfg.metric, cfg.jaccard_basis) {
            (Metric::Jaccard, JaccardBasis::ItemSets) => Some(
                features
                    .labels()
                    .iter()
                    .map(|l| store.users().get(l).map(|u| store.user_items(u)).unwrap_or_default())
                    .collect(),
            ),
            (Metric::Jaccard, JaccardBasis::NonzeroFeatures) => Some(
                features
                    .rows()
                    .map(|r| r.iter().enumerate().filter(|e| *e.1 != 0.0).map(|e| e.0).collect())
                    .collect(),
            ),
            _ => None,
        };
        let norms = features.rows().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        Ok(Self {
            features,
            sets,
            norms,
            cfg,
        })
    }

    pub fn config(&self) -> SimilarityConfig {
        self.cfg
    }

    pub fn num_rows(&self) -> usize {
        self.features.num_rows()
    }

    /// Similarity of rows `a` and `b`.
    pub fn similarity(&self, a: usize, b: usize) -> Result<f64> {
        match self.cfg.metric {
            Metric::Euclidean => euclidean_similarity(self.features.row(a), self.features.row(b)),
            Metric::Cosine => {
                if self.norms[a] == 0.0 || self.norms[b] == 0.0 {
                    return Err(Error::UndefinedSimilarity("cosine with a zero vector"));
                }
                let dot: f64 = self.features.row(a).iter().zip(self.features.row(b)).map(|(x, y)| x * y).sum();
                Ok((dot / (self.norms[a] * self.norms[b])).clamp(-1.0, 1.0))
            }
            Metric::Jaccard => {
                let sets = self.sets.as_ref().expect("jaccard sets built");
                jaccard_similarity(&sets[a], &sets[b])
            }
        }
    }

    /// Top-M rows by similarity to `row`, excluding itself; ties go to the
    /// lower row index. Pairs with undefined similarity are skipped.
    pub fn neighbors(&self, row: usize) -> Vec<(usize, f64)> {
        let mut cands: Vec<(usize, f64)> = (0..self.num_rows())
            .filter(|&v| v != row)
            .filter_map(|v| self.similarity(row, v).ok().map(|s| (v, s)))
            .collect();
        if cands.is_empty() && self.num_rows() > 1 {
            log::debug!("row {} has no peer with a defined similarity", self.features.labels()[row]);
        }
        let by_rank = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        let m = self.cfg.neighbors;
        if cands.len() > m {
            cands.select_nth_unstable_by(m - 1, by_rank);
            cands.truncate(m);
        }
        cands.sort_by(by_rank);
        cands
    }
}

/// Neighbours of the user with id `user`.
pub fn neighbors(
    user: &str,
    features: &FeatureMatrix,
    store: &InteractionStore,
    cfg: SimilarityConfig,
) -> Result<Vec<(String, f64)>> {
    let row = features
        .labels()
        .iter()
        .position(|l| l == user)
        .ok_or_else(|| Error::Config(format!("user {user} has no feature row")))?;
    let space = SimilaritySpace::new(features, store, cfg)?;
    let out = space.neighbors(row);
    if out.is_empty() {
        log::warn!("user {user} has no valid peers");
    }
    Ok(out
        .into_iter()
        .map(|(v, s)| (features.labels()[v].clone(), s))
        .collect())
}

/// Scores of one user over the store's items.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub user: usize,
    /// Indexed by item.
    pub scores: Vec<f64>,
    /// Items the user already rated; never recommended.
    pub rated: Vec<bool>,
}

impl ScoreRow {
    pub fn candidates(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.scores
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.rated[*i])
            .map(|(i, &s)| (i, s))
    }

    /// Orders `items` by score, descending, ties by ascending item index.
    pub fn rank(&self, items: &[usize]) -> Vec<usize> {
        let mut out = items.to_vec();
        out.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        out
    }
}

/// `S(u, i) = Σ_v sim(u, v) · R(v, i)` with ratings below `floor` counted as 0.
/// `neighbors` hold store user indices.
pub fn score(user: usize, neighbors: &[(usize, f64)], store: &InteractionStore, floor: f64) -> ScoreRow {
    let mut scores = vec![0.0; store.num_items()];
    for &(v, sim) in neighbors {
        for e in store.user_entries(v) {
            if e.rating >= floor {
                scores[e.item] += sim * e.rating;
            }
        }
    }
    let mut rated = vec![false; store.num_items()];
    if user < store.num_users() {
        for e in store.user_entries(user) {
            rated[e.item] = true;
        }
    }
    ScoreRow { user, scores, rated }
}

/// The `k` best candidates, descending by score, ties by ascending index.
pub fn top_k(row: &ScoreRow, k: usize) -> Result<Vec<(usize, f64)>> {
    if k < 1 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let mut cands: Vec<(usize, f64)> = row.candidates().collect();
    let by_rank = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if cands.len() > k {
        cands.select_nth_unstable_by(k - 1, by_rank);
        cands.truncate(k);
    }
    cands.sort_by(by_rank);
    Ok(cands)
}

/// Scores and neighbour lists for many users.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    /// Per row, neighbours as (store user index, similarity).
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

/// Scores every store user listed in `users`. Users without a feature row get
/// no neighbours and all-zero scores.
pub fn score_users(
    users: &[usize],
    features: &FeatureMatrix,
    store: &InteractionStore,
    cfg: SimilarityConfig,
    floor: f64,
) -> Result<ScoreTable> {
    let space = SimilaritySpace::new(features, store, cfg)?;
    let row_of = features.label_index();
    let store_index: Vec<Option<usize>> = features.labels().iter().map(|l| store.users().get(l)).collect();
    let (rows, neighbors): (Vec<ScoreRow>, Vec<Vec<(usize, f64)>>) = users
        .par_iter()
        .map(|&u| {
            let nbrs: Vec<(usize, f64)> = match row_of.get(store.users().name(u)) {
                Some(&r) => space
                    .neighbors(r)
                    .into_iter()
                    .filter_map(|(v, s)| store_index[v].map(|sv| (sv, s)))
                    .collect(),
                None => Vec::new(),
            };
            (score(u, &nbrs, store, floor), nbrs)
        })
        .unzip();
    Ok(ScoreTable { rows, neighbors })
}

/// Item popularity (number of ratings) as a score row for `user`.
pub fn popularity_row(user: usize, store: &InteractionStore) -> ScoreRow {
    let scores = store.item_counts().into_iter().map(|c| c as f64).collect();
    let mut rated = vec![false; store.num_items()];
    for e in store.user_entries(user) {
        rated[e.item] = true;
    }
    ScoreRow { user, scores, rated }
}
