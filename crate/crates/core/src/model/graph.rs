//! Simple undirected graph with labelled nodes and sorted adjacency lists.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleGraph {
    labels: Vec<String>,
    adj: Vec<Vec<usize>>,
}

impl SimpleGraph {
    /// Builds a graph from undirected index pairs. Self-loops and repeated
    /// pairs are dropped.
    pub fn from_edges<I>(labels: Vec<String>, edges: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = labels.len();
        let mut adj = vec![Vec::new(); n];
        for (a, b) in edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range for {n} nodes");
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        Self { labels, adj }
    }

    /// Builds a graph from already symmetric, sorted, deduplicated rows.
    pub(crate) fn from_adjacency(labels: Vec<String>, adj: Vec<Vec<usize>>) -> Self {
        debug_assert_eq!(labels.len(), adj.len());
        debug_assert!(adj.iter().enumerate().all(|(i, row)| {
            row.windows(2).all(|w| w[0] < w[1])
                && row.iter().all(|&j| j != i && adj[j].binary_search(&i).is_ok())
        }));
        Self { labels, adj }
    }

    /// Unlabelled graph with nodes named `0..n`.
    pub fn unlabeled<I>(n: usize, edges: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::from_edges((0..n).map(|i| i.to_string()).collect(), edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn label_index(&self) -> HashMap<&str, usize> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect()
    }

    /// Connected component id per node, numbered by smallest member.
    pub fn components(&self) -> Vec<usize> {
        let n = self.num_nodes();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in &self.adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.num_nodes();
        assert_eq!(perm.len(), n);
        let mut labels = vec![String::new(); n];
        for i in 0..n {
            labels[perm[i]] = self.labels[i].clone();
        }
        Self::from_edges(labels, self.edges().map(|(a, b)| (perm[a], perm[b])))
    }

    /// Union with extra undirected edges.
    pub fn with_extra_edges<I>(&self, extra: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::from_edges(self.labels.clone(), self.edges().chain(extra))
    }
}
