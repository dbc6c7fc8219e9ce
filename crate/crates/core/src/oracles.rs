//! Slow brute-force references used by tests and golden regeneration.
//!
//! Nothing here calls into the modules it checks.

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SimpleGraph;
use crate::rng::fnv1a;

pub const MAX_CLOSENESS_NODES: usize = 40;
pub const MAX_BETWEENNESS_NODES: usize = 25;
pub const MAX_EQUILIBRIUM_NODES: usize = 50;
pub const EQUILIBRIUM_TOL: f64 = 1e-13;
const EQUILIBRIUM_MAX_ITER: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult<T> {
    pub name: &'static str,
    pub digest: u64,
    pub values: T,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCentrality {
    pub degree: Vec<f64>,
    pub closeness: Vec<f64>,
    pub betweenness: Vec<f64>,
}

fn adjacency_matrix(g: &SimpleGraph) -> Vec<Vec<bool>> {
    let n = g.num_nodes();
    let mut m = vec![vec![false; n]; n];
    for (a, b) in g.edges() {
        m[a][b] = true;
        m[b][a] = true;
    }
    m
}

fn bfs_distances(adj: &[Vec<bool>], s: usize) -> Vec<Option<usize>> {
    let n = adj.len();
    let mut dist = vec![None; n];
    dist[s] = Some(0);
    let mut queue = VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v].unwrap();
        for w in 0..n {
            if adj[v][w] && dist[w].is_none() {
                dist[w] = Some(dv + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Collects every shortest path from `v` to `target` as node lists.
fn enumerate_paths(
    adj: &[Vec<bool>],
    from_s: &[Option<usize>],
    v: usize,
    target: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if v == target {
        out.push(current.clone());
        return;
    }
    let dv = from_s[v].unwrap();
    for w in 0..adj.len() {
        if adj[v][w] && from_s[w] == Some(dv + 1) && from_s[w] <= from_s[target] {
            current.push(w);
            enumerate_paths(adj, from_s, w, target, current, out);
            current.pop();
        }
    }
}

/// Degree by counting, closeness by BFS sums, betweenness by listing every
/// shortest path of every unordered pair.
pub fn oracle_centrality(g: &SimpleGraph) -> Result<OracleResult<OracleCentrality>> {
    let n = g.num_nodes();
    if n > MAX_BETWEENNESS_NODES {
        return Err(Error::Refused(format!(
            "centrality oracle is capped at {MAX_BETWEENNESS_NODES} nodes, got {n}"
        )));
    }
    let adj = adjacency_matrix(g);
    let degree = adj
        .iter()
        .map(|row| row.iter().filter(|&&b| b).count() as f64)
        .collect();
    let closeness = oracle_closeness_matrix(&adj);

    let mut betweenness = vec![0.0; n];
    for s in 0..n {
        let from_s = bfs_distances(&adj, s);
        for t in (s + 1)..n {
            if from_s[t].is_none() {
                continue;
            }
            let mut paths = Vec::new();
            enumerate_paths(&adj, &from_s, s, t, &mut vec![s], &mut paths);
            let total = paths.len() as f64;
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                let through = paths.iter().filter(|p| p.contains(&v)).count() as f64;
                betweenness[v] += through / total;
            }
        }
    }
    Ok(OracleResult {
        name: "centrality",
        digest: graph_digest(g),
        values: OracleCentrality {
            degree,
            closeness,
            betweenness,
        },
        tolerance: 1e-9,
    })
}

fn oracle_closeness_matrix(adj: &[Vec<bool>]) -> Vec<f64> {
    (0..adj.len())
        .map(|v| {
            let total: usize = bfs_distances(adj, v).iter().flatten().sum();
            if total == 0 {
                0.0
            } else {
                1.0 / total as f64
            }
        })
        .collect()
}

/// Degree and closeness only, for graphs up to [`MAX_CLOSENESS_NODES`].
pub fn oracle_closeness(g: &SimpleGraph) -> Result<Vec<f64>> {
    if g.num_nodes() > MAX_CLOSENESS_NODES {
        return Err(Error::Refused(format!(
            "closeness oracle is capped at {MAX_CLOSENESS_NODES} nodes, got {}",
            g.num_nodes()
        )));
    }
    Ok(oracle_closeness_matrix(&adjacency_matrix(g)))
}

fn graph_digest(g: &SimpleGraph) -> u64 {
    let text: String = g.edges().map(|(a, b)| format!("{a}-{b};")).collect();
    fnv1a(&format!("{}|{text}", g.num_nodes()))
}

fn matrix_digest(w: &[Vec<f64>]) -> u64 {
    let text: String = w
        .iter()
        .flat_map(|row| row.iter().map(|x| format!("{:x},", x.to_bits())))
        .collect();
    fnv1a(&text)
}

fn bool_product(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = a.len();
    let mut c = vec![vec![false; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] {
                for j in 0..n {
                    c[i][j] = c[i][j] || b[k][j];
                }
            }
        }
    }
    c
}

/// Whether the pattern of `w` raised to the Wielandt exponent is all positive.
fn wielandt_positive(w: &[Vec<f64>]) -> bool {
    let n = w.len();
    let base: Vec<Vec<bool>> = w.iter().map(|r| r.iter().map(|&x| x > 0.0).collect()).collect();
    let mut exponent = n * n - 2 * n + 2;
    let mut result: Option<Vec<Vec<bool>>> = None;
    let mut square = base;
    while exponent > 0 {
        if exponent & 1 == 1 {
            result = Some(match result {
                None => square.clone(),
                Some(r) => bool_product(&r, &square),
            });
        }
        exponent >>= 1;
        if exponent > 0 {
            square = bool_product(&square, &square);
        }
    }
    result.is_some_and(|r| r.iter().all(|row| row.iter().all(|&b| b)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEquilibrium {
    pub pi: Vec<f64>,
    pub iterations: usize,
}

impl OracleEquilibrium {
    /// πᵀ P(0).
    pub fn consensus(&self, p0: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..p0.len() {
            total += self.pi[i] * p0[i];
        }
        total
    }
}

/// Left Perron vector of a dense row-stochastic matrix by plain power
/// iteration on Wᵀ from the uniform vector.
pub fn oracle_equilibrium(w: &[Vec<f64>]) -> Result<OracleResult<OracleEquilibrium>> {
    let n = w.len();
    if n == 0 || n > MAX_EQUILIBRIUM_NODES {
        return Err(Error::Refused(format!(
            "equilibrium oracle needs 1..={MAX_EQUILIBRIUM_NODES} nodes, got {n}"
        )));
    }
    if w.iter().any(|r| r.len() != n) {
        return Err(Error::Refused("matrix is not square".into()));
    }
    if n > 1 && !wielandt_positive(w) {
        return Err(Error::Refused(
            "matrix is not primitive: its Wielandt-exponent power has a zero entry".into(),
        ));
    }
    let mut pi = vec![1.0 / n as f64; n];
    for it in 1..=EQUILIBRIUM_MAX_ITER {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += pi[i] * w[i][j];
            }
        }
        let mass: f64 = next.iter().sum();
        for x in &mut next {
            *x /= mass;
        }
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if change < EQUILIBRIUM_TOL {
            return Ok(OracleResult {
                name: "equilibrium",
                digest: matrix_digest(w),
                values: OracleEquilibrium { pi, iterations: it },
                tolerance: EQUILIBRIUM_TOL,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: EQUILIBRIUM_MAX_ITER,
        residual: f64::NAN,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleMetrics {
    pub hr: f64,
    pub mrr: f64,
    pub ndcg: f64,
    pub precision: f64,
    pub recall: f64,
}

/// HR, MRR (truncated at K), NDCG with binary relevance, Precision and
/// Recall, averaged over users whose relevant set is nonempty.
pub fn oracle_metrics(
    rankings: &[Vec<usize>],
    relevant: &[Vec<usize>],
    ks: &[usize],
) -> Result<OracleResult<BTreeMap<usize, OracleMetrics>>> {
    if ks.contains(&0) {
        return Err(Error::Refused("K must be at least 1".into()));
    }
    let mut out = BTreeMap::new();
    for &k in ks {
        let mut users = 0usize;
        let (mut hr, mut mrr, mut ndcg, mut precision, mut recall) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (ranking, rel) in rankings.iter().zip(relevant) {
            let rel: HashSet<usize> = rel.iter().copied().collect();
            if rel.is_empty() {
                continue;
            }
            users += 1;
            let top: Vec<usize> = ranking.iter().take(k).copied().collect();
            let hits = top.iter().filter(|i| rel.contains(i)).count();
            if hits > 0 {
                hr += 1.0;
            }
            if let Some(pos) = top.iter().position(|i| rel.contains(i)) {
                mrr += 1.0 / (pos + 1) as f64;
            }
            let mut dcg = 0.0;
            for (pos, item) in top.iter().enumerate() {
                let r = if rel.contains(item) { 1.0 } else { 0.0 };
                dcg += (2f64.powf(r) - 1.0) / ((pos + 2) as f64).log2();
            }
            let mut idcg = 0.0;
            for pos in 0..rel.len().min(k) {
                idcg += 1.0 / ((pos + 2) as f64).log2();
            }
            ndcg += dcg / idcg;
            precision += hits as f64 / k as f64;
            recall += hits as f64 / rel.len() as f64;
        }
        let u = users.max(1) as f64;
        out.insert(
            k,
            OracleMetrics {
                hr: hr / u,
                mrr: mrr / u,
                ndcg: ndcg / u,
                precision: precision / u,
                recall: recall / u,
            },
        );
    }
    let digest = fnv1a(&format!("{rankings:?}|{relevant:?}|{ks:?}"));
    Ok(OracleResult {
        name: "metrics",
        digest,
        values: out,
        tolerance: 1e-12,
    })
}

/// Smallest value of `f` on a regular `steps × steps` grid over a box.
pub fn oracle_grid_minimum<F>(f: F, lo: [f64; 2], hi: [f64; 2], steps: usize) -> (f64, [f64; 2])
where
    F: Fn(&[f64]) -> f64,
{
    let mut best = (f64::INFINITY, lo);
    for a in 0..=steps {
        for b in 0..=steps {
            let x = lo[0] + (hi[0] - lo[0]) * a as f64 / steps as f64;
            let y = lo[1] + (hi[1] - lo[1]) * b as f64 / steps as f64;
            let v = f(&[x, y]);
            if v < best.0 {
                best = (v, [x, y]);
            }
        }
    }
    best
}
