//! Hypergraph with co-interaction and co-preference hyperedges.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::IdMap;
use crate::model::{FeatureMatrix, InteractionStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HyperedgeKind {
    CoInteraction,
    CoPreference,
}

/// Inclusive interval of timestamps, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!(
                "time window start {start} is after end {end}"
            )));
        }
        Ok(Self { start, end })
    }

    /// Window of length `span` ending at the store's latest timestamp.
    pub fn trailing(store: &InteractionStore, span: i64) -> Result<Self> {
        let latest = store
            .entries()
            .iter()
            .filter_map(|e| e.timestamp)
            .max()
            .ok_or_else(|| Error::Config("store has no timestamps".into()))?;
        Self::new(latest.saturating_sub(span), latest)
    }

    pub fn contains(&self, t: i64) -> bool {
        (self.start..=self.end).contains(&t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperedge {
    /// Sorted, distinct node indices.
    pub members: Vec<usize>,
    pub kind: HyperedgeKind,
    /// Item id shared by a co-interaction hyperedge.
    pub anchor: Option<String>,
    pub window: Option<TimeWindow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    nodes: IdMap,
    edges: Vec<Hyperedge>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct HypergraphStats {
    pub nodes: usize,
    pub co_interaction: usize,
    pub co_preference: usize,
}

impl Hypergraph {
    pub fn new(nodes: IdMap, edges: Vec<Hyperedge>) -> Result<Self> {
        for (k, e) in edges.iter().enumerate() {
            if e.members.len() < 2 {
                return Err(Error::Config(format!(
                    "hyperedge {k} has {} member(s), need at least 2",
                    e.members.len()
                )));
            }
            if !e.members.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Config(format!("hyperedge {k} members not sorted/distinct")));
            }
            if e.members.iter().any(|&m| m >= nodes.len()) {
                return Err(Error::Config(format!("hyperedge {k} references an unknown node")));
            }
            match (e.kind, &e.anchor) {
                (HyperedgeKind::CoInteraction, None) => {
                    return Err(Error::Config(format!("co-interaction hyperedge {k} has no anchor")))
                }
                (HyperedgeKind::CoPreference, Some(_)) => {
                    return Err(Error::Config(format!("co-preference hyperedge {k} has an anchor")))
                }
                _ => {}
            }
        }
        Ok(Self { nodes, edges })
    }

    pub fn nodes(&self) -> &IdMap {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    /// Membership count per node.
    pub fn node_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            for &m in &e.members {
                deg[m] += 1;
            }
        }
        deg
    }

    pub fn stats(&self) -> HypergraphStats {
        let mut s = HypergraphStats {
            nodes: self.nodes.len(),
            ..Default::default()
        };
        for e in &self.edges {
            match e.kind {
                HyperedgeKind::CoInteraction => s.co_interaction += 1,
                HyperedgeKind::CoPreference => s.co_preference += 1,
            }
        }
        s
    }

    /// Keeps only the nodes for which `keep` is true, renumbering members.
    /// Hyperedges that fall below two members are dropped.
    pub fn restrict_nodes<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(usize) -> bool,
    {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = IdMap::new();
        for i in 0..self.nodes.len() {
            if keep(i) {
                remap[i] = nodes.intern(self.nodes.name(i));
            }
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|e| {
                let members: Vec<usize> = e
                    .members
                    .iter()
                    .filter(|&&m| remap[m] != usize::MAX)
                    .map(|&m| remap[m])
                    .collect();
                (members.len() >= 2).then(|| Hyperedge {
                    members,
                    ..e.clone()
                })
            })
            .collect();
        Self { nodes, edges }
    }

    /// Union of two hypergraphs over the union of their node sets. Node order:
    /// `self`'s nodes first, then unseen nodes of `other` in their order.
    pub fn merge(&self, other: &Hypergraph) -> Self {
        let mut nodes = self.nodes.clone();
        let remap: Vec<usize> = other
            .nodes
            .names()
            .iter()
            .map(|n| nodes.intern(n))
            .collect();
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|e| {
            let mut members: Vec<usize> = e.members.iter().map(|&m| remap[m]).collect();
            members.sort_unstable();
            Hyperedge {
                members,
                ..e.clone()
            }
        }));
        Self { nodes, edges }
    }

    /// One line per hyperedge: `kind anchor|- member…`.
    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for e in &self.edges {
            let kind = match e.kind {
                HyperedgeKind::CoInteraction => "co-interaction",
                HyperedgeKind::CoPreference => "co-preference",
            };
            write!(out, "{kind} {}", e.anchor.as_deref().unwrap_or("-"))?;
            for &m in &e.members {
                write!(out, " {}", self.nodes.name(m))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// One hyperedge per item rated by at least two users (inside `window`, when
/// given). Node set: every user of the store.
pub fn build_co_interaction(
    store: &InteractionStore,
    window: Option<TimeWindow>,
) -> Result<Hypergraph> {
    if window.is_some() && !store.has_timestamps() {
        return Err(Error::Config(
            "a co-interaction window needs timestamps on every rating".into(),
        ));
    }
    let mut raters: Vec<Vec<usize>> = vec![Vec::new(); store.num_items()];
    for e in store.entries() {
        let admitted = match (window, e.timestamp) {
            (Some(w), Some(t)) => w.contains(t),
            _ => true,
        };
        if admitted {
            raters[e.item].push(e.user);
        }
    }
    let edges = raters
        .into_iter()
        .enumerate()
        .filter(|(_, members)| members.len() >= 2)
        .map(|(item, mut members)| {
            members.sort_unstable();
            members.dedup();
            Hyperedge {
                members,
                kind: HyperedgeKind::CoInteraction,
                anchor: Some(store.items().name(item).to_owned()),
                window,
            }
        })
        .collect();
    Hypergraph::new(store.users().clone(), edges)
}

/// Co-preference hyperedges plus the rows that could not take part.
#[derive(Debug, Clone)]
pub struct CoPreference {
    pub hypergraph: Hypergraph,
    /// Nodes whose feature row has zero norm (cosine undefined).
    pub zero_norm: Vec<String>,
}

/// Groups nodes into the connected components of the graph that links every
/// pair with cosine similarity ≥ `gamma`; singleton components are dropped.
pub fn build_co_preference(features: &FeatureMatrix, gamma: f64) -> Result<CoPreference> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Config(format!("gamma {gamma} outside (0, 1]")));
    }
    let n = features.num_rows();
    let norms: Vec<f64> = features
        .rows()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let zero_norm: Vec<String> = (0..n)
        .filter(|&i| norms[i] == 0.0)
        .map(|i| features.labels()[i].clone())
        .collect();

    let links: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if norms[i] == 0.0 {
                return Vec::new();
            }
            let xi = features.row(i);
            ((i + 1)..n)
                .filter(|&j| {
                    norms[j] > 0.0 && {
                        let dot: f64 = xi.iter().zip(features.row(j)).map(|(a, b)| a * b).sum();
                        dot / (norms[i] * norms[j]) >= gamma
                    }
                })
                .collect()
        })
        .collect();

    let mut uf = UnionFind::new(n);
    for (i, row) in links.iter().enumerate() {
        for &j in row {
            uf.union(i, j);
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        groups[uf.find(i)].push(i);
    }
    let mut members: Vec<Vec<usize>> = groups.into_iter().filter(|g| g.len() >= 2).collect();
    members.sort_by_key(|g| g[0]);
    let edges = members
        .into_iter()
        .map(|members| Hyperedge {
            members,
            kind: HyperedgeKind::CoPreference,
            anchor: None,
            window: None,
        })
        .collect();
    let mut nodes = IdMap::new();
    for l in features.labels() {
        nodes.intern(l);
    }
    Ok(CoPreference {
        hypergraph: Hypergraph::new(nodes, edges)?,
        zero_norm,
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index becomes the root so roots are deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DedupRule, RawRating};

    fn store(rows: &[(&str, &str, f64, Option<i64>)]) -> InteractionStore {
        InteractionStore::from_records(
            rows.iter().map(|&(u, i, r, t)| RawRating {
                user: u.into(),
                item: i.into(),
                rating: r,
                timestamp: t,
            }),
            DedupRule::KeepMax,
        )
        .unwrap()
    }

    fn member_names(h: &Hypergraph, e: &Hyperedge) -> Vec<String> {
        e.members.iter().map(|&m| h.nodes().name(m).to_owned()).collect()
    }

    #[test]
    fn shared_item_forms_anchored_hyperedge() {
        let s = store(&[("u1", "i1", 4.0, None), ("u2", "i1", 3.0, None), ("u1", "i2", 5.0, None)]);
        let h = build_co_interaction(&s, None).unwrap();
        assert_eq!(h.edges().len(), 1);
        let e = &h.edges()[0];
        assert_eq!(member_names(&h, e), vec!["u1", "u2"]);
        assert_eq!(e.anchor.as_deref(), Some("i1"));
    }

    #[test]
    fn single_rater_item_has_no_hyperedge() {
        let s = store(&[("u1", "i2", 4.0, None)]);
        assert!(build_co_interaction(&s, None).unwrap().edges().is_empty());
    }

    #[test]
    fn window_excludes_out_of_range_raters() {
        // timestamps 10, 20, 95; window [0, 50] keeps u1 and u2 only
        let s = store(&[
            ("u1", "i1", 4.0, Some(10)),
            ("u2", "i1", 4.0, Some(20)),
            ("u3", "i1", 4.0, Some(95)),
        ]);
        let h = build_co_interaction(&s, Some(TimeWindow::new(0, 50).unwrap())).unwrap();
        assert_eq!(h.edges().len(), 1);
        assert_eq!(member_names(&h, &h.edges()[0]), vec!["u1", "u2"]);
    }

    #[test]
    fn window_without_timestamps_is_a_config_error() {
        let s = store(&[("u1", "i1", 4.0, None), ("u2", "i1", 4.0, None)]);
        let err = build_co_interaction(&s, Some(TimeWindow::new(0, 1).unwrap())).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    fn fm(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows((0..rows.len()).map(|i| format!("n{i}")).collect(), rows).unwrap()
    }

    #[test]
    fn identical_rows_group_together() {
        let f = fm(&[vec![1.0, 2.0], vec![1.0, 2.0]]);
        let cp = build_co_preference(&f, 0.7).unwrap();
        assert_eq!(cp.hypergraph.edges().len(), 1);
        assert_eq!(cp.hypergraph.edges()[0].members, vec![0, 1]);
    }

    #[test]
    fn orthogonal_rows_do_not() {
        let f = fm(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(build_co_preference(&f, 0.7).unwrap().hypergraph.edges().is_empty());
    }

    #[test]
    fn two_similarity_components() {
        // n0~n2 (cos 0.995), n1~n3 (cos 0.995), cross pairs near 0
        let f = fm(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.1],
            vec![0.1, 1.0],
        ]);
        let cp = build_co_preference(&f, 0.7).unwrap();
        let groups: Vec<Vec<usize>> = cp.hypergraph.edges().iter().map(|e| e.members.clone()).collect();
        assert_eq!(groups, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn zero_rows_are_reported() {
        let f = fm(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]]);
        let cp = build_co_preference(&f, 0.9).unwrap();
        assert_eq!(cp.zero_norm, vec!["n0".to_string()]);
        assert_eq!(cp.hypergraph.edges()[0].members, vec![1, 2]);
    }

    #[test]
    fn rejects_bad_gamma() {
        let f = fm(&[vec![1.0]]);
        assert!(build_co_preference(&f, 0.0).is_err());
        assert!(build_co_preference(&f, 1.5).is_err());
    }

    #[test]
    fn invariants_enforced() {
        let nodes = IdMap::from_sorted_names(["a", "b"]);
        let single = Hyperedge {
            members: vec![0],
            kind: HyperedgeKind::CoPreference,
            anchor: None,
            window: None,
        };
        assert!(Hypergraph::new(nodes.clone(), vec![single]).is_err());
        let unanchored = Hyperedge {
            members: vec![0, 1],
            kind: HyperedgeKind::CoInteraction,
            anchor: None,
            window: None,
        };
        assert!(Hypergraph::new(nodes, vec![unanchored]).is_err());
    }
}
