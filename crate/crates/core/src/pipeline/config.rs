//! Flat `key = value` run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::{Lambda, DEFAULT_ETA};
use crate::embedding::{ConcatWeights, SkipGramConfig, WalkConfig};
use crate::error::{Error, Result};
use crate::evaluation::EvalProtocol;
use crate::model::{DedupRule, TimeWindow, MAX_RATING, MIN_RATING};
use crate::preprocess::DEFAULT_PHI;
use crate::propagation::{AttentionLogit, PropagationConfig};
use crate::recommender::{JaccardBasis, SimilarityConfig};

/// Graph the embedding walks run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkGraph {
    /// Clique expansion plus social edges (the centrality graph).
    Clique,
    /// Node–hyperedge incidence graph plus social edges.
    Star,
}

pub const DEFAULT_BATCH_SIZE: usize = 128;
pub const DEFAULT_GAMMA: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub ratings: Option<PathBuf>,
    pub trust: Option<PathBuf>,
    pub dedup: DedupRule,
    /// Source rating scale mapped linearly onto 1–5 at load.
    pub rescale: Option<(f64, f64)>,
    /// Rating threshold t, also the scoring floor.
    pub threshold: f64,
    pub phi: f64,
    pub gamma: f64,
    pub window: Option<TimeWindow>,
    pub use_centrality: bool,
    pub concat: ConcatWeights,
    pub walk_graph: WalkGraph,
    pub walk: WalkConfig,
    pub skipgram: SkipGramConfig,
    pub propagation: PropagationConfig,
    pub similarity: SimilarityConfig,
    pub protocol: EvalProtocol,
    pub lambda: Lambda,
    pub eta: f64,
    pub batch_size: usize,
    /// Overrides the batch count derived from `batch_size`.
    pub n_batches: Option<usize>,
    pub max_iter: usize,
    pub batch_eps: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ratings: None,
            trust: None,
            dedup: DedupRule::KeepMax,
            rescale: None,
            threshold: 1.0,
            phi: DEFAULT_PHI,
            gamma: DEFAULT_GAMMA,
            window: None,
            use_centrality: true,
            concat: ConcatWeights::default(),
            walk_graph: WalkGraph::Star,
            walk: WalkConfig::default(),
            skipgram: SkipGramConfig::default(),
            propagation: PropagationConfig::default(),
            similarity: SimilarityConfig::default(),
            protocol: EvalProtocol::default(),
            lambda: Lambda::default(),
            eta: DEFAULT_ETA,
            batch_size: DEFAULT_BATCH_SIZE,
            n_batches: None,
            max_iter: 1,
            batch_eps: 1e-6,
            seed: 0,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected on/off, found `{value}`"))),
    }
}

/// Splits on `,`, `:` or `/`.
fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split([',', ':', '/'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

impl RunConfig {
    /// Every key accepted by [`RunConfig::set`].
    pub const KEYS: &'static [&'static str] = &[
        "ratings",
        "trust",
        "dedup",
        "rescale",
        "threshold",
        "phi",
        "gamma",
        "window",
        "centrality",
        "concat.embedding",
        "concat.centrality",
        "walk.graph",
        "walk.length",
        "walk.per_node",
        "walk.p",
        "walk.q",
        "embed.dim",
        "embed.window",
        "embed.negatives",
        "embed.epochs",
        "embed.lr",
        "propagation.variant",
        "propagation.layers",
        "propagation.activation",
        "propagation.alpha",
        "propagation.bias",
        "propagation.epsilon",
        "propagation.logit",
        "propagation.unnormalized",
        "metric",
        "neighbors",
        "jaccard_basis",
        "topk",
        "split",
        "negatives",
        "graded",
        "lambda",
        "eta",
        "batch_size",
        "n_batches",
        "max_iter",
        "batch_eps",
        "seed",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "ratings" => self.ratings = Some(PathBuf::from(v)),
            "trust" => self.trust = (!v.is_empty()).then(|| PathBuf::from(v)),
            "dedup" => self.dedup = v.parse()?,
            "rescale" => {
                self.rescale = if v.is_empty() || v == "none" {
                    None
                } else {
                    let b: Vec<f64> = list(key, v)?;
                    if b.len() != 2 || !(b[0] < b[1]) {
                        return Err(Error::Config(format!("`rescale`: expected lo:hi, found `{v}`")));
                    }
                    Some((b[0], b[1]))
                }
            }
            "threshold" => self.threshold = num(key, v)?,
            "phi" => self.phi = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "window" => {
                self.window = if v.is_empty() || v == "none" {
                    None
                } else {
                    let b: Vec<i64> = list(key, v)?;
                    if b.len() != 2 {
                        return Err(Error::Config(format!("`window`: expected start:end, found `{v}`")));
                    }
                    Some(TimeWindow::new(b[0], b[1])?)
                }
            }
            "centrality" => self.use_centrality = flag(key, v)?,
            "concat.embedding" => self.concat.embedding = num(key, v)?,
            "concat.centrality" => self.concat.centrality = num(key, v)?,
            "walk.graph" => {
                self.walk_graph = match v {
                    "clique" => WalkGraph::Clique,
                    "star" => WalkGraph::Star,
                    _ => return Err(Error::Config(format!("`{key}`: expected clique or star, found `{v}`"))),
                }
            }
            "walk.length" => self.walk.length = num(key, v)?,
            "walk.per_node" => self.walk.per_node = num(key, v)?,
            "walk.p" => self.walk.p = num(key, v)?,
            "walk.q" => self.walk.q = num(key, v)?,
            "embed.dim" => self.skipgram.dim = num(key, v)?,
            "embed.window" => self.skipgram.window = num(key, v)?,
            "embed.negatives" => self.skipgram.negatives = num(key, v)?,
            "embed.epochs" => self.skipgram.epochs = num(key, v)?,
            "embed.lr" => self.skipgram.learning_rate = num(key, v)?,
            "propagation.variant" => self.propagation.variant = v.parse()?,
            "propagation.layers" => self.propagation.layers = num(key, v)?,
            "propagation.activation" => self.propagation.activation = v.parse()?,
            "propagation.alpha" => self.propagation.alpha = num(key, v)?,
            "propagation.bias" => self.propagation.bias = num(key, v)?,
            "propagation.epsilon" => self.propagation.epsilon = num(key, v)?,
            "propagation.logit" => {
                self.propagation.logit = match v {
                    "transformed" => AttentionLogit::Transformed,
                    "pair" => AttentionLogit::Pair,
                    _ => return Err(Error::Config(format!("`{key}`: expected transformed or pair, found `{v}`"))),
                }
            }
            "propagation.unnormalized" => self.propagation.unnormalized_attention = flag(key, v)?,
            "metric" => self.similarity.metric = v.parse()?,
            "neighbors" => self.similarity.neighbors = num(key, v)?,
            "jaccard_basis" => {
                self.similarity.jaccard_basis = match v {
                    "item-sets" => JaccardBasis::ItemSets,
                    "nonzero-features" => JaccardBasis::NonzeroFeatures,
                    _ => return Err(Error::Config(format!("`{key}`: expected item-sets or nonzero-features, found `{v}`"))),
                }
            }
            "topk" => self.protocol.ks = list(key, v)?,
            "split" => self.protocol.split = v.parse()?,
            "negatives" => self.protocol.negatives = num(key, v)?,
            "graded" => self.protocol.graded = flag(key, v)?,
            "lambda" => {
                let l: Vec<f64> = list(key, v)?;
                if l.len() != 3 {
                    return Err(Error::Config(format!("`lambda`: expected three weights, found `{v}`")));
                }
                self.lambda = Lambda::new(l[0], l[1], l[2])?;
            }
            "eta" => self.eta = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "n_batches" => self.n_batches = Some(num(key, v)?),
            "max_iter" => self.max_iter = num(key, v)?,
            "batch_eps" => self.batch_eps = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against `base`.
    pub fn apply_text(&mut self, text: &str, base: Option<&Path>) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match (k, base) {
                ("ratings" | "trust", Some(dir)) if !v.is_empty() && Path::new(v).is_relative() => {
                    self.set(k, &dir.join(v).to_string_lossy())?
                }
                _ => self.set(k, v)?,
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path.parent())?;
        Ok(cfg)
    }

    /// `key=value` override from the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{kv}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    /// Range checks that do not need data. Input files must exist when set.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for p in [&self.ratings, &self.trust].into_iter().flatten() {
            if !p.exists() {
                return bad(format!("input file {} does not exist", p.display()));
            }
        }
        if !(MIN_RATING..=MAX_RATING).contains(&self.threshold) {
            return bad(format!("threshold {} outside [{MIN_RATING}, {MAX_RATING}]", self.threshold));
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return bad(format!("phi {} must be finite and nonnegative", self.phi));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta {} outside [0, 1]", self.eta));
        }
        if self.batch_size < 1 || self.n_batches == Some(0) {
            return bad("batch size and batch count must be at least 1".into());
        }
        if !(self.batch_eps > 0.0) {
            return bad("batch eps must be positive".into());
        }
        if self.similarity.neighbors < 1 {
            return bad("neighbors must be at least 1".into());
        }
        if self.skipgram.dim < 1 {
            return bad("embedding dimension must be at least 1".into());
        }
        self.protocol.validate()
    }

    /// Batch count for `n` nodes.
    pub fn batches_for(&self, n: usize) -> usize {
        self.n_batches.unwrap_or_else(|| n.div_ceil(self.batch_size).max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_overrides() {
        let mut c = RunConfig::default();
        c.apply_text(
            "# comment\nthreshold = 2\nmetric = jaccard  # trailing\nlambda = 0.1, 0.3, 0.6\ntopk = 5,10\nratings = r.txt\n",
            Some(Path::new("/data")),
        )
        .unwrap();
        assert_eq!(c.threshold, 2.0);
        assert_eq!(c.lambda.0, [0.1, 0.3, 0.6]);
        assert_eq!(c.protocol.ks, vec![5, 10]);
        assert_eq!(c.ratings.as_deref(), Some(Path::new("/data/r.txt")));
        c.apply_override("threshold=3").unwrap();
        assert_eq!(c.threshold, 3.0);
        assert!(c.apply_override("nope=1").is_err());
        assert!(c.apply_text("threshold 3", None).is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let samples = [
            ("dedup", "keep-last"),
            ("window", "0:10"),
            ("rescale", "0.5:4"),
            ("centrality", "off"),
            ("propagation.variant", "gin-sl"),
            ("propagation.activation", "relu"),
            ("propagation.logit", "pair"),
            ("propagation.unnormalized", "on"),
            ("jaccard_basis", "nonzero-features"),
            ("split", "random"),
            ("graded", "on"),
            ("lambda", "0.1:0.3:0.9"),
            ("metric", "cosine"),
            ("walk.graph", "clique"),
            ("ratings", "x"),
            ("trust", "y"),
        ];
        for key in RunConfig::KEYS {
            let mut c = RunConfig::default();
            let v = samples.iter().find(|s| s.0 == *key).map_or("1", |s| s.1);
            c.set(key, v).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.threshold = 6.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.ratings = Some("/definitely/missing".into());
        assert!(c.validate().is_err());
        assert_eq!(RunConfig::default().batches_for(1508), 12);
    }
}
