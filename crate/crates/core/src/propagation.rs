//! Fixed-parameter message passing: attention, convolution, isomorphism and
//! isomorphism with self loops.
//!
//! Each layer computes `h' = σ(h + α·m + b)` where `m` is the variant's
//! neighbour message. The attention transform `W` and vector `a` are drawn
//! from the seed and unit-normalized; nothing is learned.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureMatrix, SimpleGraph};
use crate::rng;

const PARAM_STREAM: u64 = 0x4741_5450;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Attention,
    Convolution,
    Isomorphism,
    IsomorphismSelfLoops,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Attention,
        Variant::Convolution,
        Variant::Isomorphism,
        Variant::IsomorphismSelfLoops,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Variant::Attention => "gat",
            Variant::Convolution => "gcn",
            Variant::Isomorphism => "gin",
            Variant::IsomorphismSelfLoops => "gin-sl",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gat" | "attention" => Ok(Variant::Attention),
            "gcn" | "convolution" => Ok(Variant::Convolution),
            "gin" | "isomorphism" => Ok(Variant::Isomorphism),
            "gin-sl" | "isomorphism-self-loops" => Ok(Variant::IsomorphismSelfLoops),
            other => Err(Error::Config(format!("unknown propagation variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(slope) => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Identity => x,
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "leaky-relu" => Ok(Activation::LeakyRelu(0.2)),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// Which features enter the attention logit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionLogit {
    /// `a · [h_i ‖ h_j ‖ W h_i ‖ W h_j]`
    Transformed,
    /// `a · [h_i ‖ h_j]`
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationConfig {
    pub variant: Variant,
    pub layers: usize,
    pub activation: Activation,
    /// Message scale α.
    pub alpha: f64,
    pub bias: f64,
    /// Self weight offset for the self-loop isomorphism variant.
    pub epsilon: f64,
    pub logit: AttentionLogit,
    /// Use raw `exp(logit)` weights instead of the softmax.
    pub unnormalized_attention: bool,
    pub seed: u64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Attention,
            layers: 2,
            activation: Activation::LeakyRelu(0.2),
            alpha: 1.0,
            bias: 0.0,
            epsilon: 0.0,
            logit: AttentionLogit::Transformed,
            unnormalized_attention: false,
            seed: 0,
        }
    }
}

/// Seeded attention parameters for feature dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub dim: usize,
    /// Row-major `dim × dim`, each row of unit norm.
    pub transform: Vec<f64>,
    /// Length `4·dim`, unit norm.
    pub vector: Vec<f64>,
}

impl AttentionParams {
    pub fn seeded(dim: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, &[PARAM_STREAM, dim as u64]);
        let mut draw = |len: usize| -> Vec<f64> {
            let mut v: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            v
        };
        let transform = (0..dim).flat_map(|_| draw(dim)).collect();
        let vector = draw(4 * dim);
        Self {
            dim,
            transform,
            vector,
        }
    }

    fn transformed(&self, h: &[f64]) -> Vec<f64> {
        self.transform
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(h).map(|(w, x)| w * x).sum())
            .collect()
    }

    /// The logit of edge (i, j).
    pub fn logit(&self, form: AttentionLogit, hi: &[f64], hj: &[f64], whi: &[f64], whj: &[f64]) -> f64 {
        let d = self.dim;
        let a = &self.vector;
        let dot = |seg: usize, x: &[f64]| -> f64 { a[seg * d..(seg + 1) * d].iter().zip(x).map(|(p, q)| p * q).sum() };
        match form {
            AttentionLogit::Pair => dot(0, hi) + dot(1, hj),
            AttentionLogit::Transformed => dot(0, hi) + dot(1, hj) + dot(2, whi) + dot(3, whj),
        }
    }
}

/// Softmax of `logits` with the maximum subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

fn check_alignment(h: &FeatureMatrix, g: &SimpleGraph) -> Result<()> {
    if h.labels() == g.labels() {
        return Ok(());
    }
    let graph: std::collections::HashSet<&str> = g.labels().iter().map(String::as_str).collect();
    let feats: std::collections::HashSet<&str> = h.labels().iter().map(String::as_str).collect();
    let only_left = h.labels().iter().filter(|l| !graph.contains(l.as_str())).cloned().collect();
    let only_right = g.labels().iter().filter(|l| !feats.contains(l.as_str())).cloned().collect();
    Err(Error::NodeSetMismatch {
        only_left,
        only_right,
    })
}

/// Per-node neighbour weights, aligned with `g.neighbors(i)`.
///
/// For the attention variant these are the softmax-normalized (or raw
/// exponential) attention coefficients. For the other variants they are the
/// structural weights of the aggregation: `1/√(deg_i deg_j)` for convolution
/// and 1 for both isomorphism variants.
pub fn attention_coefficients(
    h: &FeatureMatrix,
    g: &SimpleGraph,
    cfg: &PropagationConfig,
    params: &AttentionParams,
) -> Result<Vec<Vec<f64>>> {
    check_alignment(h, g)?;
    let n = g.num_nodes();
    match cfg.variant {
        Variant::Attention => {
            let wh: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| params.transformed(h.row(i))).collect();
            Ok((0..n)
                .into_par_iter()
                .map(|i| {
                    let logits: Vec<f64> = g
                        .neighbors(i)
                        .iter()
                        .map(|&j| params.logit(cfg.logit, h.row(i), h.row(j), &wh[i], &wh[j]))
                        .collect();
                    if logits.is_empty() {
                        Vec::new()
                    } else if cfg.unnormalized_attention {
                        logits.iter().map(|l| l.exp()).collect()
                    } else {
                        softmax(&logits)
                    }
                })
                .collect())
        }
        Variant::Convolution => Ok((0..n)
            .map(|i| {
                g.neighbors(i)
                    .iter()
                    .map(|&j| 1.0 / ((g.degree(i) * g.degree(j)) as f64).sqrt())
                    .collect()
            })
            .collect()),
        Variant::Isomorphism | Variant::IsomorphismSelfLoops => {
            Ok((0..n).map(|i| vec![1.0; g.degree(i)]).collect())
        }
    }
}

/// `m_i = Σ_j c_ij h_j`, plus `(1+ε) h_i` for the self-loop variant.
pub fn aggregate(
    h: &FeatureMatrix,
    g: &SimpleGraph,
    coeffs: &[Vec<f64>],
    cfg: &PropagationConfig,
) -> FeatureMatrix {
    let d = h.dim();
    let n = g.num_nodes();
    let data: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut m = vec![0.0; d];
            if cfg.variant == Variant::IsomorphismSelfLoops {
                for (mk, hk) in m.iter_mut().zip(h.row(i)) {
                    *mk = (1.0 + cfg.epsilon) * hk;
                }
            }
            for (&j, &c) in g.neighbors(i).iter().zip(&coeffs[i]) {
                for (mk, hk) in m.iter_mut().zip(h.row(j)) {
                    *mk += c * hk;
                }
            }
            m
        })
        .collect();
    FeatureMatrix::from_parts_unchecked(h.labels().to_vec(), d, data)
}

/// `h' = σ(h + α·m + b)`; a non-finite result names the node.
pub fn update(h: &FeatureMatrix, messages: &FeatureMatrix, cfg: &PropagationConfig) -> Result<FeatureMatrix> {
    let data: Vec<f64> = h
        .as_slice()
        .par_iter()
        .zip(messages.as_slice())
        .map(|(x, m)| cfg.activation.apply(x + cfg.alpha * m + cfg.bias))
        .collect();
    FeatureMatrix::new(h.labels().to_vec(), h.dim(), data)
}

/// Returns `h⁽⁰⁾ … h⁽ᴸ⁾`.
pub fn propagate(h0: &FeatureMatrix, g: &SimpleGraph, cfg: &PropagationConfig) -> Result<Vec<FeatureMatrix>> {
    if cfg.layers < 1 {
        return Err(Error::Config("propagation needs at least one layer".into()));
    }
    check_alignment(h0, g)?;
    let params = AttentionParams::seeded(h0.dim(), cfg.seed);
    let mut states = vec![h0.clone()];
    for _ in 0..cfg.layers {
        let h = states.last().expect("h0 present");
        let coeffs = attention_coefficients(h, g, cfg, &params)?;
        let m = aggregate(h, g, &coeffs, cfg);
        let next = update(h, &m, cfg)?;
        states.push(next);
    }
    Ok(states)
}
