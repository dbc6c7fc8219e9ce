//! Cleaning: isolated-node removal, rating threshold, anomaly scores and
//! pairwise trust.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ids::IdMap;
use crate::model::{Hypergraph, InteractionStore, TimeWindow, MAX_RATING, MIN_RATING};

/// Default anomaly cutoff φ.
pub const DEFAULT_PHI: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedUser {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CleanReport {
    pub input_entries: usize,
    pub removed_duplicates: usize,
    pub removed_below_threshold: usize,
    pub removed_anomalous_entries: usize,
    pub flagged_anomalies: Vec<FlaggedUser>,
    pub removed_isolated: usize,
    pub kept_entries: usize,
}

/// Drops nodes that belong to no hyperedge.
pub fn remove_isolated(h: &Hypergraph) -> (Hypergraph, CleanReport) {
    let degrees = h.node_degrees();
    let cleaned = h.restrict_nodes(|i| degrees[i] > 0);
    let report = CleanReport {
        removed_isolated: h.num_nodes() - cleaned.num_nodes(),
        ..Default::default()
    };
    (cleaned, report)
}

/// Keeps the entries with rating ≥ `t` and drops users/items left empty.
pub fn threshold_filter(store: &InteractionStore, t: f64) -> Result<InteractionStore> {
    if !(MIN_RATING..=MAX_RATING).contains(&t) {
        return Err(Error::Config(format!(
            "rating threshold {t} outside [{MIN_RATING}, {MAX_RATING}]"
        )));
    }
    Ok(store.retain(|e| e.rating >= t).compact())
}

/// Per-user anomaly score ψ, aligned with the store's user index.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyScores {
    users: IdMap,
    scores: Vec<f64>,
}

impl AnomalyScores {
    pub fn get(&self, user: &str) -> Option<f64> {
        self.users.get(user).map(|i| self.scores[i])
    }

    pub fn values(&self) -> &[f64] {
        &self.scores
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.users
            .names()
            .iter()
            .map(String::as_str)
            .zip(self.scores.iter().copied())
    }

    /// Users with ψ > `phi`, in index order.
    pub fn flagged(&self, phi: f64) -> Vec<FlaggedUser> {
        self.iter()
            .filter(|&(_, s)| s > phi)
            .map(|(id, score)| FlaggedUser {
                id: id.to_owned(),
                score,
            })
            .collect()
    }
}

/// ψ_u = (n_u / max_v n_v) · Var(nonzero ratings of u), with n_u the number
/// of nonzero ratings and population variance. Users with ≤ 1 rating score 0.
pub fn anomaly_scores(store: &InteractionStore) -> Result<AnomalyScores> {
    if store.is_empty() {
        return Err(Error::Empty("cannot score anomalies on an empty store".into()));
    }
    let stats: Vec<(usize, f64)> = (0..store.num_users())
        .into_par_iter()
        .map(|u| {
            let ratings: Vec<f64> = store
                .user_entries(u)
                .iter()
                .map(|e| e.rating)
                .filter(|&r| r != 0.0)
                .collect();
            (ratings.len(), population_variance(&ratings))
        })
        .collect();
    let max_count = stats.iter().map(|s| s.0).max().unwrap_or(0);
    let scores = stats
        .iter()
        .map(|&(n, var)| {
            if n <= 1 {
                0.0
            } else {
                n as f64 / max_count as f64 * var
            }
        })
        .collect();
    Ok(AnomalyScores {
        users: store.users().clone(),
        scores,
    })
}

fn population_variance(xs: &[f64]) -> f64 {
    if xs.len() <= 1 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Removes every entry of a user whose score exceeds `phi`. Id maps are kept.
pub fn exclude_anomalies(
    store: &InteractionStore,
    scores: &AnomalyScores,
    phi: f64,
) -> Result<InteractionStore> {
    let mut drop = vec![false; store.num_users()];
    for (u, flag) in drop.iter_mut().enumerate() {
        let name = store.users().name(u);
        let score = scores
            .get(name)
            .ok_or_else(|| Error::Config(format!("no anomaly score for user {name}")))?;
        *flag = score > phi;
    }
    Ok(store.retain(|e| !drop[e.user]))
}

/// Symmetric pairwise trust τ over users with at least one co-rated item.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustTable {
    users: IdMap,
    /// Keyed by `(a, b)` with `a < b`.
    pairs: BTreeMap<(usize, usize), f64>,
}

impl TrustTable {
    pub fn users(&self) -> &IdMap {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let (a, b) = (self.users.get(a)?, self.users.get(b)?);
        self.get_index(a, b)
    }

    pub fn get_index(&self, a: usize, b: usize) -> Option<f64> {
        self.pairs.get(&(a.min(b), a.max(b))).copied()
    }

    /// Stored pairs `(a, b, τ)` with `a < b`, ordered by index.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pairs.iter().map(|(&(a, b), &t)| (a, b, t))
    }

    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for (a, b, t) in self.iter() {
            writeln!(out, "{} {} {t}", self.users.name(a), self.users.name(b))?;
        }
        Ok(())
    }
}

/// τ_uv = exp(−Var(r_ui − r_vi)) over co-rated items, population variance.
pub fn trust_scores(store: &InteractionStore) -> TrustTable {
    trust_scores_in(store, None)
}

/// Like [`trust_scores`], counting only ratings whose timestamps fall in
/// `window`. Entries without timestamps are skipped when a window is given.
pub fn trust_scores_in(store: &InteractionStore, window: Option<TimeWindow>) -> TrustTable {
    let admitted = |t: Option<i64>| match (window, t) {
        (None, _) => true,
        (Some(w), Some(t)) => w.contains(t),
        (Some(_), None) => false,
    };
    let n = store.num_users();
    let mut raters: Vec<Vec<(usize, f64)>> = vec![Vec::new(); store.num_items()];
    for e in store.entries() {
        if admitted(e.timestamp) {
            raters[e.item].push((e.user, e.rating));
        }
    }

    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|u| {
            // Welford accumulators over differences r_u − r_v, v > u
            let mut count = vec![0usize; n];
            let mut mean = vec![0.0f64; n];
            let mut m2 = vec![0.0f64; n];
            let mut touched = Vec::new();
            for e in store.user_entries(u) {
                if !admitted(e.timestamp) {
                    continue;
                }
                for &(v, rv) in &raters[e.item] {
                    if v <= u {
                        continue;
                    }
                    if count[v] == 0 {
                        touched.push(v);
                    }
                    count[v] += 1;
                    let d = e.rating - rv;
                    let delta = d - mean[v];
                    mean[v] += delta / count[v] as f64;
                    m2[v] += delta * (d - mean[v]);
                }
            }
            touched.sort_unstable();
            touched
                .into_iter()
                .map(|v| {
                    let var = (m2[v] / count[v] as f64).max(0.0);
                    (v, (-var).exp())
                })
                .collect()
        })
        .collect();

    let pairs = rows
        .into_iter()
        .enumerate()
        .flat_map(|(u, row)| row.into_iter().map(move |(v, t)| ((u, v), t)))
        .collect();
    TrustTable {
        users: store.users().clone(),
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_co_interaction, DedupRule, Hyperedge, HyperedgeKind, RawRating};

    pub(crate) fn store(rows: &[(&str, &str, f64)]) -> InteractionStore {
        InteractionStore::from_records(
            rows.iter().map(|&(u, i, r)| RawRating {
                user: u.into(),
                item: i.into(),
                rating: r,
                timestamp: None,
            }),
            DedupRule::KeepMax,
        )
        .unwrap()
    }

    #[test]
    fn isolated_node_removed() {
        let s = store(&[("a", "i", 1.0), ("b", "i", 1.0), ("x", "j", 1.0)]);
        let h = build_co_interaction(&s, None).unwrap();
        let (clean, report) = remove_isolated(&h);
        assert_eq!(report.removed_isolated, 1);
        assert_eq!(clean.nodes().names(), &["a", "b"]);
        assert_eq!(clean.edges().len(), 1);
    }

    #[test]
    fn fully_covered_hypergraph_unchanged() {
        let s = store(&[("a", "i", 1.0), ("b", "i", 1.0)]);
        let h = build_co_interaction(&s, None).unwrap();
        let (clean, report) = remove_isolated(&h);
        assert_eq!(report.removed_isolated, 0);
        assert_eq!(clean, h);
    }

    #[test]
    fn five_nodes_one_hyperedge() {
        let nodes = IdMap::from_sorted_names(["a", "b", "c", "d", "e"]);
        let e = Hyperedge {
            members: vec![0, 1],
            kind: HyperedgeKind::CoPreference,
            anchor: None,
            window: None,
        };
        let h = Hypergraph::new(nodes, vec![e]).unwrap();
        let (clean, report) = remove_isolated(&h);
        assert_eq!(report.removed_isolated, 3);
        assert_eq!(clean.nodes().names(), &["a", "b"]);
    }

    #[test]
    fn threshold_keeps_ratings_at_or_above() {
        let s = store(&[("u1", "i1", 4.0), ("u1", "i2", 2.0)]);
        let f = threshold_filter(&s, 3.0).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.items().names(), &["i1"]);
        assert_eq!(f.entries()[0].rating, 4.0);
    }

    #[test]
    fn threshold_zero_is_identity() {
        let s = store(&[("u1", "i1", 0.0), ("u2", "i2", 3.5)]);
        assert_eq!(threshold_filter(&s, 0.0).unwrap(), s);
    }

    #[test]
    fn threshold_out_of_range() {
        let s = store(&[("u1", "i1", 1.0)]);
        assert!(threshold_filter(&s, 5.5).is_err());
    }

    #[test]
    fn constant_rater_scores_zero() {
        let s = store(&[("u", "a", 3.0), ("u", "b", 3.0), ("u", "c", 3.0)]);
        let sc = anomaly_scores(&s).unwrap();
        assert_eq!(sc.get("u"), Some(0.0));
    }

    #[test]
    fn most_active_inconsistent_rater() {
        // u has ratings {1,5}: ratio 1, mean 3, Var = (4+4)/2 = 4
        let s = store(&[("u", "a", 1.0), ("u", "b", 5.0), ("v", "a", 2.0)]);
        let sc = anomaly_scores(&s).unwrap();
        assert_eq!(sc.get("u"), Some(4.0));
        assert_eq!(sc.get("v"), Some(0.0));
        let flagged = sc.flagged(DEFAULT_PHI);
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].id, "u");
    }

    #[test]
    fn zero_ratings_ignored_by_anomaly_score() {
        let s = store(&[("u", "a", 0.0), ("u", "b", 2.0), ("u", "c", 4.0)]);
        // nonzero {2,4}: n=2 is the max, Var = 1
        assert_eq!(anomaly_scores(&s).unwrap().get("u"), Some(1.0));
    }

    #[test]
    fn anomaly_on_empty_store_errors() {
        let s = store(&[]);
        assert!(matches!(anomaly_scores(&s), Err(Error::Empty(_))));
    }

    #[test]
    fn exclusion_removes_flagged_entries() {
        let s = store(&[
            ("bad", "a", 0.5),
            ("bad", "b", 5.0),
            ("bad", "c", 0.5),
            ("ok", "a", 3.0),
        ]);
        let sc = anomaly_scores(&s).unwrap();
        let out = exclude_anomalies(&s, &sc, DEFAULT_PHI).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.users().name(out.entries()[0].user), "ok");
        // nothing above a huge cutoff
        assert_eq!(exclude_anomalies(&s, &sc, 100.0).unwrap(), s);
    }

    #[test]
    fn hyperactive_inconsistent_rater_is_the_only_flag() {
        // "spam" rates 6 items alternating 0.5 / 5; others rate 2 items 3.0/4.0.
        // spam: mean 2.75, Var = 2.25² = 5.0625, ratio 1 → ψ = 5.0625
        // others: ratio 2/6, Var 0.25 → ψ ≈ 0.0833
        let mut rows = Vec::new();
        let items = ["a", "b", "c", "d", "e", "f"];
        for (k, it) in items.iter().enumerate() {
            rows.push(("spam", *it, if k % 2 == 0 { 0.5 } else { 5.0 }));
        }
        for u in ["p", "q", "r"] {
            rows.push((u, "a", 3.0));
            rows.push((u, "b", 4.0));
        }
        let s = store(&rows);
        let sc = anomaly_scores(&s).unwrap();
        assert!((sc.get("spam").unwrap() - 5.0625).abs() < 1e-12);
        assert!((sc.get("p").unwrap() - 0.25 / 3.0).abs() < 1e-12);
        let out = exclude_anomalies(&s, &sc, DEFAULT_PHI).unwrap();
        assert_eq!(out.len(), 6);
        assert!(out.entries().iter().all(|e| out.users().name(e.user) != "spam"));
    }

    #[test]
    fn identical_co_ratings_give_full_trust() {
        let s = store(&[("a", "x", 3.0), ("a", "y", 4.0), ("b", "x", 3.0), ("b", "y", 4.0)]);
        assert_eq!(trust_scores(&s).get("a", "b"), Some(1.0));
    }

    #[test]
    fn trust_of_differences_zero_and_two() {
        // differences {0, 2}: mean 1, Var 1
        let s = store(&[("a", "x", 3.0), ("a", "y", 5.0), ("b", "x", 3.0), ("b", "y", 3.0)]);
        let t = trust_scores(&s);
        assert!((t.get("a", "b").unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(t.get("b", "a"), t.get("a", "b"));
    }

    #[test]
    fn disjoint_raters_have_no_trust_entry() {
        let s = store(&[("a", "x", 3.0), ("b", "y", 3.0)]);
        let t = trust_scores(&s);
        assert!(t.is_empty());
        assert_eq!(t.get("a", "b"), None);
    }

    #[test]
    fn constant_offset_gives_full_trust() {
        let s = store(&[
            ("a", "x", 1.5),
            ("a", "y", 2.5),
            ("a", "z", 4.0),
            ("b", "x", 2.0),
            ("b", "y", 3.0),
            ("b", "z", 4.5),
        ]);
        assert_eq!(trust_scores(&s).get("a", "b"), Some(1.0));
    }
}
