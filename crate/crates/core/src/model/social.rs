//! Weighted user-user trust edges.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ids::IdMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocialEdge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialGraph {
    nodes: IdMap,
    edges: Vec<SocialEdge>,
    self_loops_dropped: usize,
}

impl SocialGraph {
    /// Builds a graph from `(source, target, weight)` triples. Self-loops are
    /// dropped and counted; their endpoints still become nodes.
    pub fn from_triples<I, S>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, f64)>,
        S: AsRef<str>,
    {
        let triples: Vec<(String, String, f64)> = triples
            .into_iter()
            .map(|(a, b, w)| (a.as_ref().to_owned(), b.as_ref().to_owned(), w))
            .collect();
        for (_, _, w) in &triples {
            if !w.is_finite() || !(0.0..=1.0).contains(w) {
                return Err(Error::Range {
                    path: "<triples>".into(),
                    line: 0,
                    value: *w,
                    min: 0.0,
                    max: 1.0,
                });
            }
        }
        let nodes = IdMap::from_sorted_names(
            triples
                .iter()
                .flat_map(|(a, b, _)| [a.clone(), b.clone()]),
        );
        let mut edges = Vec::with_capacity(triples.len());
        let mut self_loops = 0;
        for (a, b, w) in &triples {
            if a == b {
                self_loops += 1;
                continue;
            }
            edges.push(SocialEdge {
                source: nodes.get(a).expect("interned"),
                target: nodes.get(b).expect("interned"),
                weight: *w,
            });
        }
        Ok(Self {
            nodes,
            edges,
            self_loops_dropped: self_loops,
        })
    }

    pub fn nodes(&self) -> &IdMap {
        &self.nodes
    }

    pub fn edges(&self) -> &[SocialEdge] {
        &self.edges
    }

    pub fn self_loops_dropped(&self) -> usize {
        self.self_loops_dropped
    }

    /// Edges as `(source id, target id, weight)`.
    pub fn named_edges(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.edges
            .iter()
            .map(|e| (self.nodes.name(e.source), self.nodes.name(e.target), e.weight))
    }

    /// Out-neighbours of `node` (the node's ego network, minus the node).
    pub fn ego_neighbors(&self, node: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.source == node {
                    Some(e.target)
                } else if e.target == node {
                    Some(e.source)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Parses a trust file: `source target [weight]`, weight defaulting to 1.0.
pub fn load_social(path: &Path) -> Result<SocialGraph> {
    let text = fs::read_to_string(path)?;
    let mut triples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        if fields.len() < 2 || fields.len() > 3 {
            return Err(parse_err(format!(
                "expected `source target [weight]`, found {} field(s)",
                fields.len()
            )));
        }
        let weight = match fields.get(2) {
            None => 1.0,
            Some(raw) => raw
                .parse::<f64>()
                .map_err(|_| parse_err(format!("weight `{raw}` is not a number")))?,
        };
        if !weight.is_finite() || !(0.0..=1.0).contains(&weight) {
            return Err(Error::Range {
                path: path.to_path_buf(),
                line: line_no,
                value: weight,
                min: 0.0,
                max: 1.0,
            });
        }
        triples.push((fields[0].to_owned(), fields[1].to_owned(), weight));
    }
    let graph = SocialGraph::from_triples(triples)?;
    if graph.self_loops_dropped() > 0 {
        log::warn!(
            "{}: dropped {} self-loop edge(s)",
            path.display(),
            graph.self_loops_dropped()
        );
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn load(text: &str) -> Result<SocialGraph> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        load_social(f.path())
    }

    #[test]
    fn weighted_edge() {
        let g = load("a b 0.5\n").unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.edges()[0].weight, 0.5);
    }

    #[test]
    fn default_weight_is_one() {
        let g = load("a b\n").unwrap();
        assert_eq!(g.edges()[0].weight, 1.0);
    }

    #[test]
    fn self_loop_dropped_with_warning_count() {
        let g = load("a a 1.0\n").unwrap();
        assert_eq!(g.edges().len(), 0);
        assert_eq!(g.self_loops_dropped(), 1);
    }

    #[test]
    fn malformed_line_is_a_parse_error() {
        assert!(matches!(load("a b c\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load("a\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load("a b 2\n"), Err(Error::Range { line: 1, .. })));
    }

    #[test]
    fn ego_network() {
        let g = load("a b\nc a\nb c\n").unwrap();
        let a = g.nodes().get("a").unwrap();
        let names: Vec<&str> = g.ego_neighbors(a).iter().map(|&i| g.nodes().name(i)).collect();
        assert_eq!(names, vec!["b", "c"]);
    }
}
