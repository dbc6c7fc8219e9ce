//! Degree, closeness and betweenness on simple undirected graphs.
//!
//! Betweenness is reported over unordered pairs, unnormalized. Closeness is
//! taken within the node's connected component.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::model::{Hypergraph, SimpleGraph};

/// Sources per parallel Brandes task. Fixed so the reduction order does not
/// depend on the worker count.
const SOURCE_CHUNK: usize = 32;

/// Clique expansion: two nodes are adjacent iff they share a hyperedge.
pub fn project_hypergraph(h: &Hypergraph) -> SimpleGraph {
    let n = h.num_nodes();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, e) in h.edges().iter().enumerate() {
        for &m in &e.members {
            incident[m].push(k);
        }
    }
    let adj: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut row: Vec<usize> = incident[v]
                .iter()
                .flat_map(|&k| h.edges()[k].members.iter().copied())
                .filter(|&u| u != v)
                .collect();
            row.sort_unstable();
            row.dedup();
            row
        })
        .collect();
    SimpleGraph::from_adjacency(h.nodes().names().to_vec(), adj)
}

/// Star expansion: the hypergraph's nodes first, then one node per hyperedge
/// (labelled `#e<k>`), each joined to its members.
pub fn star_expansion(h: &Hypergraph) -> SimpleGraph {
    let n = h.num_nodes();
    let mut labels = h.nodes().names().to_vec();
    labels.extend((0..h.edges().len()).map(|k| format!("#e{k}")));
    let edges = h
        .edges()
        .iter()
        .enumerate()
        .flat_map(|(k, e)| e.members.iter().map(move |&m| (m, n + k)));
    SimpleGraph::from_edges(labels, edges)
}

pub fn degree(g: &SimpleGraph) -> Vec<f64> {
    (0..g.num_nodes()).map(|v| g.degree(v) as f64).collect()
}

fn bfs_distance_sum(g: &SimpleGraph, source: usize, dist: &mut [usize], queue: &mut VecDeque<usize>) -> usize {
    dist.fill(usize::MAX);
    dist[source] = 0;
    queue.clear();
    queue.push_back(source);
    let mut total = 0;
    while let Some(v) = queue.pop_front() {
        total += dist[v];
        for &w in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    total
}

/// 1 / Σ d(v, u) over the nodes u reachable from v; 0 when v reaches no one.
pub fn closeness(g: &SimpleGraph) -> Vec<f64> {
    let n = g.num_nodes();
    (0..n)
        .into_par_iter()
        .map_init(
            || (vec![usize::MAX; n], VecDeque::new()),
            |(dist, queue), v| {
                let total = bfs_distance_sum(g, v, dist, queue);
                if total == 0 {
                    0.0
                } else {
                    1.0 / total as f64
                }
            },
        )
        .collect()
}

struct BrandesScratch {
    sigma: Vec<f64>,
    dist: Vec<usize>,
    delta: Vec<f64>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
}

impl BrandesScratch {
    fn new(n: usize) -> Self {
        Self {
            sigma: vec![0.0; n],
            dist: vec![usize::MAX; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::new(),
        }
    }

    /// Adds source `s`'s dependencies into `acc`.
    fn accumulate(&mut self, g: &SimpleGraph, s: usize, acc: &mut [f64]) {
        self.sigma.fill(0.0);
        self.dist.fill(usize::MAX);
        self.delta.fill(0.0);
        self.order.clear();
        self.queue.clear();
        self.sigma[s] = 1.0;
        self.dist[s] = 0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            for &w in g.neighbors(v) {
                if self.dist[w] == usize::MAX {
                    self.dist[w] = self.dist[v] + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == self.dist[v] + 1 {
                    self.sigma[w] += self.sigma[v];
                }
            }
        }
        for &w in self.order.iter().rev() {
            for &v in g.neighbors(w) {
                if self.dist[v] != usize::MAX && self.dist[v] + 1 == self.dist[w] {
                    self.delta[v] += self.sigma[v] / self.sigma[w] * (1.0 + self.delta[w]);
                }
            }
            if w != s {
                acc[w] += self.delta[w];
            }
        }
    }
}

/// Σ over unordered pairs {s, t} (s ≠ v ≠ t) of σ_st(v) / σ_st.
pub fn betweenness(g: &SimpleGraph) -> Vec<f64> {
    let n = g.num_nodes();
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut scratch = BrandesScratch::new(n);
            let mut acc = vec![0.0; n];
            for &s in chunk {
                scratch.accumulate(g, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    // each unordered pair was counted from both endpoints
    total.iter_mut().for_each(|b| *b /= 2.0);
    total
}

/// Raw centralities per node, in graph index order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityVector {
    pub labels: Vec<String>,
    pub degree: Vec<f64>,
    pub closeness: Vec<f64>,
    pub betweenness: Vec<f64>,
}

/// Centralities rescaled to [0, 1] per measure.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCentrality {
    pub degree: Vec<f64>,
    pub closeness: Vec<f64>,
    pub betweenness: Vec<f64>,
}

impl CentralityVector {
    pub fn compute(g: &SimpleGraph) -> Self {
        Self {
            labels: g.labels().to_vec(),
            degree: degree(g),
            closeness: closeness(g),
            betweenness: betweenness(g),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Min-max normalization; a constant measure maps to all zeros.
    pub fn min_max(&self) -> NormalizedCentrality {
        NormalizedCentrality {
            degree: min_max(&self.degree),
            closeness: min_max(&self.closeness),
            betweenness: min_max(&self.betweenness),
        }
    }

    /// Division by the maximum; an all-zero measure stays zero.
    pub fn max_scaled(&self) -> NormalizedCentrality {
        NormalizedCentrality {
            degree: max_scaled(&self.degree),
            closeness: max_scaled(&self.closeness),
            betweenness: max_scaled(&self.betweenness),
        }
    }

    /// `node,degree,closeness,betweenness,deg_norm,close_norm,betw_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let norm = self.min_max();
        writeln!(out, "node,degree,closeness,betweenness,deg_norm,close_norm,betw_norm")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.labels[i],
                self.degree[i],
                self.closeness[i],
                self.betweenness[i],
                norm.degree[i],
                norm.closeness[i],
                norm.betweenness[i]
            )?;
        }
        Ok(())
    }
}

pub fn min_max(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

pub fn max_scaled(xs: &[f64]) -> Vec<f64> {
    let hi = xs.iter().copied().fold(0.0, f64::max);
    if hi <= 0.0 {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| x / hi).collect()
}
