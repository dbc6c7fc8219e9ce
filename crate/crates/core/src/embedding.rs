//! Second-order biased random walks, skip-gram with negative sampling, and
//! the concatenation of embeddings with normalized centralities.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::centrality::CentralityVector;
use crate::error::{Error, Result};
use crate::model::{FeatureMatrix, SimpleGraph};
use crate::rng;

const WALK_STREAM: u64 = 0x5741_4c4b;
const SKIPGRAM_STREAM: u64 = 0x5347_4e53;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkConfig {
    pub length: usize,
    pub per_node: usize,
    pub p: f64,
    pub q: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            length: 20,
            per_node: 10,
            p: 1.0,
            q: 1.0,
        }
    }
}

impl WalkConfig {
    fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::Config(format!("walk length {} < 2", self.length)));
        }
        if self.per_node < 1 {
            return Err(Error::Config("walks per node must be at least 1".into()));
        }
        if !(self.p > 0.0 && self.p.is_finite() && self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::Config(format!(
                "walk bias p={} q={} must be positive and finite",
                self.p, self.q
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    pub labels: Vec<String>,
    /// Node index sequences, ordered by (walk round, start node).
    pub walks: Vec<Vec<usize>>,
    pub config: WalkConfig,
}

impl WalkCorpus {
    pub fn num_tokens(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }
}

/// `per_node` walks from every non-isolated node. The walk from node `v` in
/// round `r` draws from its own generator, so the corpus does not depend on
/// scheduling.
pub fn generate_walks(g: &SimpleGraph, cfg: WalkConfig, seed: u64) -> Result<WalkCorpus> {
    cfg.validate()?;
    if g.num_edges() == 0 {
        log::warn!("graph has no edges; walk corpus is empty");
    }
    let starts: Vec<usize> = (0..g.num_nodes()).filter(|&v| g.degree(v) > 0).collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.per_node)
        .flat_map(|r| starts.iter().map(move |&v| (r, v)))
        .collect();
    let walks = jobs
        .par_iter()
        .map(|&(r, v)| {
            let mut rng = rng::stream(seed, &[WALK_STREAM, v as u64, r as u64]);
            walk_from(g, v, &cfg, &mut rng)
        })
        .collect();
    Ok(WalkCorpus {
        labels: g.labels().to_vec(),
        walks,
        config: cfg,
    })
}

fn walk_from<R: Rng>(g: &SimpleGraph, start: usize, cfg: &WalkConfig, rng: &mut R) -> Vec<usize> {
    let mut walk = Vec::with_capacity(cfg.length);
    walk.push(start);
    let first = g.neighbors(start);
    if first.is_empty() {
        return walk;
    }
    walk.push(first[rng.gen_range(0..first.len())]);
    let uniform = cfg.p == 1.0 && cfg.q == 1.0;
    let (w_return, w_out) = (1.0 / cfg.p, 1.0 / cfg.q);
    let w_max = w_return.max(1.0).max(w_out);
    while walk.len() < cfg.length {
        let cur = walk[walk.len() - 1];
        let prev = walk[walk.len() - 2];
        let nbrs = g.neighbors(cur);
        if nbrs.is_empty() {
            break;
        }
        let next = if uniform {
            nbrs[rng.gen_range(0..nbrs.len())]
        } else {
            // rejection sampling against the unnormalized second-order weights
            loop {
                let x = nbrs[rng.gen_range(0..nbrs.len())];
                let w = if x == prev {
                    w_return
                } else if g.has_edge(prev, x) {
                    1.0
                } else {
                    w_out
                };
                if rng.gen::<f64>() * w_max < w {
                    break x;
                }
            }
        };
        walk.push(next);
    }
    walk
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vectors: FeatureMatrix,
    pub config: SkipGramConfig,
    pub seed: u64,
    /// Nodes that never appeared in the corpus; their rows are zero.
    pub missing: Vec<String>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Skip-gram with negative sampling over the corpus. Negatives follow the
/// unigram distribution raised to 0.75; the learning rate decays linearly.
pub fn train_skipgram(corpus: &WalkCorpus, cfg: SkipGramConfig, seed: u64) -> Result<EmbeddingTable> {
    let d = cfg.dim;
    if d == 0 {
        return Err(Error::Config("embedding dimension must be at least 1".into()));
    }
    if cfg.window == 0 || cfg.epochs == 0 {
        return Err(Error::Config("window and epochs must be at least 1".into()));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::Config(format!("learning rate {} must be positive", cfg.learning_rate)));
    }
    let n = corpus.labels.len();
    let total_tokens = corpus.num_tokens();
    if total_tokens == 0 {
        return Err(Error::Empty("walk corpus has no tokens".into()));
    }

    let mut counts = vec![0usize; n];
    for walk in &corpus.walks {
        for &v in walk {
            counts[v] += 1;
        }
    }
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &c in &counts {
        acc += (c as f64).powf(0.75);
        cumulative.push(acc);
    }

    let mut rng = rng::stream(seed, &[SKIPGRAM_STREAM]);
    let mut input: Vec<f64> = (0..n * d).map(|_| (rng.gen::<f64>() - 0.5) / d as f64).collect();
    let mut output = vec![0.0f64; n * d];
    let mut grad = vec![0.0f64; d];

    let schedule = (cfg.epochs * total_tokens) as f64;
    let min_lr = cfg.learning_rate * 1e-4;
    let mut processed = 0usize;
    for _epoch in 0..cfg.epochs {
        for walk in &corpus.walks {
            for (pos, &center) in walk.iter().enumerate() {
                let lr = (cfg.learning_rate * (1.0 - processed as f64 / schedule)).max(min_lr);
                processed += 1;
                let span = cfg.window - rng.gen_range(0..cfg.window);
                let lo = pos.saturating_sub(span);
                let hi = (pos + span).min(walk.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = walk[ctx_pos];
                    grad.fill(0.0);
                    let ci = center * d;
                    for k in 0..=cfg.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let draw = rng.gen::<f64>() * acc;
                            let t = cumulative.partition_point(|&c| c <= draw).min(n - 1);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let ti = target * d;
                        let dot: f64 = (0..d).map(|j| input[ci + j] * output[ti + j]).sum();
                        let g = (label - sigmoid(dot)) * lr;
                        for j in 0..d {
                            grad[j] += g * output[ti + j];
                            output[ti + j] += g * input[ci + j];
                        }
                    }
                    for j in 0..d {
                        input[ci + j] += grad[j];
                    }
                }
            }
        }
    }

    let mut missing = Vec::new();
    for v in 0..n {
        if counts[v] == 0 {
            input[v * d..(v + 1) * d].fill(0.0);
            missing.push(corpus.labels[v].clone());
        }
    }
    if !missing.is_empty() {
        log::info!("{} node(s) absent from the walk corpus get zero embeddings", missing.len());
    }
    Ok(EmbeddingTable {
        vectors: FeatureMatrix::new(corpus.labels.clone(), d, input)?,
        config: cfg,
        seed,
        missing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcatWeights {
    pub embedding: f64,
    pub centrality: f64,
}

impl Default for ConcatWeights {
    fn default() -> Self {
        Self {
            embedding: 1.0,
            centrality: 1.0,
        }
    }
}

/// `M_i = [w_emb·V_i ‖ w_cent·(closeness, degree, betweenness)]` with min-max
/// normalized centralities, in the embedding's row order.
pub fn concat_features(
    emb: &FeatureMatrix,
    cent: &CentralityVector,
    w: ConcatWeights,
) -> Result<FeatureMatrix> {
    let cent_index: std::collections::HashMap<&str, usize> = cent
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let emb_index = emb.label_index();
    let only_left: Vec<String> = emb
        .labels()
        .iter()
        .filter(|l| !cent_index.contains_key(l.as_str()))
        .cloned()
        .collect();
    let only_right: Vec<String> = cent
        .labels
        .iter()
        .filter(|l| !emb_index.contains_key(l.as_str()))
        .cloned()
        .collect();
    if !only_left.is_empty() || !only_right.is_empty() {
        return Err(Error::NodeSetMismatch {
            only_left,
            only_right,
        });
    }
    let norm = cent.min_max();
    let d = emb.dim();
    let mut data = Vec::with_capacity(emb.num_rows() * (d + 3));
    for (label, row) in emb.labels().iter().zip(emb.rows()) {
        let c = cent_index[label.as_str()];
        data.extend(row.iter().map(|v| w.embedding * v));
        data.push(w.centrality * norm.closeness[c]);
        data.push(w.centrality * norm.degree[c]);
        data.push(w.centrality * norm.betweenness[c]);
    }
    FeatureMatrix::new(emb.labels().to_vec(), d + 3, data)
}
