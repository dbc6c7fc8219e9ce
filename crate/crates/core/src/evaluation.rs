//! Leave-one-out split, top-K ranking metrics and the sweep harness.
//!
//! Averages use Neumaier-compensated sums taken in user order, so metric
//! values do not depend on the worker count.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::InteractionStore;
use crate::rng;

const SPLIT_STREAM: u64 = 0x5350_4c54;
const NEGATIVE_STREAM: u64 = 0x4e45_4753;

pub const DEFAULT_NEGATIVES: usize = 99;
pub const DEFAULT_KS: [usize; 5] = [1, 5, 10, 15, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Hold out the latest interaction; falls back to `Random` without
    /// timestamps.
    ByTime,
    Random,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by-time" | "time" => Ok(SplitMode::ByTime),
            "random" => Ok(SplitMode::Random),
            other => Err(Error::Config(format!("unknown split mode `{other}`"))),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::ByTime => "by-time",
            SplitMode::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalProtocol {
    pub split: SplitMode,
    /// Sampled negatives per user; 0 ranks every unseen item.
    pub negatives: usize,
    pub ks: Vec<usize>,
    /// Use the held-out rating as relevance grade in NDCG.
    pub graded: bool,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            split: SplitMode::ByTime,
            negatives: DEFAULT_NEGATIVES,
            ks: DEFAULT_KS.to_vec(),
            graded: false,
            seed: 0,
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::Config("K list must be nonempty with every K ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldOut {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
}

/// A train/test split. Indices refer to the input store, whose id maps the
/// training store shares.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: InteractionStore,
    pub held_out: Vec<HeldOut>,
    /// Per held-out user, the items ranked against the held-out one.
    pub negatives: Vec<Vec<usize>>,
    pub excluded_users: usize,
    /// The split actually used after any fallback.
    pub mode: SplitMode,
}

impl Split {
    /// Candidate list for the `n`th held-out user: held-out item then negatives.
    pub fn candidates(&self, n: usize) -> Vec<usize> {
        let mut c = Vec::with_capacity(self.negatives[n].len() + 1);
        c.push(self.held_out[n].item);
        c.extend_from_slice(&self.negatives[n]);
        c
    }
}

/// Leave-one-out split; users with fewer than two interactions are excluded
/// and counted.
pub fn split(store: &InteractionStore, protocol: &EvalProtocol) -> Result<Split> {
    protocol.validate()?;
    if store.is_empty() {
        return Err(Error::Empty("no interactions to split".into()));
    }
    let mode = match protocol.split {
        SplitMode::ByTime if !store.has_timestamps() => {
            log::info!("no timestamps; using seeded random leave-one-out");
            SplitMode::Random
        }
        m => m,
    };
    let mut held_out = Vec::new();
    let mut excluded_users = 0;
    for u in 0..store.num_users() {
        let entries = store.user_entries(u);
        if entries.len() < 2 {
            if !entries.is_empty() {
                excluded_users += 1;
            }
            continue;
        }
        let pick = match mode {
            SplitMode::ByTime => entries
                .iter()
                .max_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.item.cmp(&b.item)))
                .expect("nonempty"),
            SplitMode::Random => &entries[rng::stream(protocol.seed, &[SPLIT_STREAM, u as u64]).gen_range(0..entries.len())],
        };
        held_out.push(HeldOut {
            user: u,
            item: pick.item,
            rating: pick.rating,
        });
    }
    let negatives = held_out
        .par_iter()
        .map(|h| {
            let seen: HashSet<usize> = store.user_items(h.user).into_iter().collect();
            let unseen: Vec<usize> = (0..store.num_items()).filter(|i| !seen.contains(i)).collect();
            if protocol.negatives == 0 || protocol.negatives >= unseen.len() {
                return unseen;
            }
            let mut r = rng::stream(protocol.seed, &[NEGATIVE_STREAM, h.user as u64]);
            let mut picked: Vec<usize> = sample(&mut r, unseen.len(), protocol.negatives)
                .into_iter()
                .map(|k| unseen[k])
                .collect();
            picked.sort_unstable();
            picked
        })
        .collect();
    let held: HashSet<(usize, usize)> = held_out.iter().map(|h| (h.user, h.item)).collect();
    let train = store.retain(|e| !held.contains(&(e.user, e.item)));
    Ok(Split {
        train,
        held_out,
        negatives,
        excluded_users,
        mode,
    })
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricValues {
    pub hr: f64,
    pub mrr: f64,
    pub ndcg: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub per_k: BTreeMap<usize, MetricValues>,
    pub users_evaluated: usize,
    pub users_skipped: usize,
}

fn per_user(ranking: &[usize], grades: &[(usize, f64)], ks: &[usize], graded: bool) -> Vec<MetricValues> {
    let grade_of: BTreeMap<usize, f64> = grades.iter().copied().collect();
    let mut ideal: Vec<f64> = grades.iter().map(|g| if graded { g.1 } else { 1.0 }).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let gain = |r: f64| 2f64.powf(r) - 1.0;
    let discount = |pos: usize| ((pos + 2) as f64).log2();
    ks.iter()
        .map(|&k| {
            let top = &ranking[..ranking.len().min(k)];
            let mut hits = 0usize;
            let mut first = None;
            let mut dcg = 0.0;
            for (pos, item) in top.iter().enumerate() {
                if let Some(&g) = grade_of.get(item) {
                    hits += 1;
                    first.get_or_insert(pos);
                    dcg += gain(if graded { g } else { 1.0 }) / discount(pos);
                }
            }
            let idcg: f64 = ideal.iter().take(k).enumerate().map(|(pos, &r)| gain(r) / discount(pos)).sum();
            MetricValues {
                hr: if hits > 0 { 1.0 } else { 0.0 },
                mrr: first.map_or(0.0, |p| 1.0 / (p + 1) as f64),
                ndcg: if idcg > 0.0 { dcg / idcg } else { 0.0 },
                precision: hits as f64 / k as f64,
                recall: hits as f64 / grades.len() as f64,
            }
        })
        .collect()
}

fn summarize(rankings: &[Vec<usize>], relevant: &[Vec<(usize, f64)>], ks: &[usize], graded: bool) -> Result<MetricSummary> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("K list must be nonempty with every K ≥ 1".into()));
    }
    if rankings.len() != relevant.len() {
        return Err(Error::Config(format!(
            "{} rankings but {} relevant sets",
            rankings.len(),
            relevant.len()
        )));
    }
    let rows: Vec<Option<Vec<MetricValues>>> = rankings
        .par_iter()
        .zip(relevant)
        .map(|(r, g)| (!g.is_empty()).then(|| per_user(r, g, ks, graded)))
        .collect();
    let users_evaluated = rows.iter().flatten().count();
    let mut sums = vec![[CompensatedSum::default(); 5]; ks.len()];
    for row in rows.iter().flatten() {
        for (acc, m) in sums.iter_mut().zip(row) {
            for (s, v) in acc.iter_mut().zip([m.hr, m.mrr, m.ndcg, m.precision, m.recall]) {
                s.add(v);
            }
        }
    }
    let n = users_evaluated.max(1) as f64;
    let per_k = ks
        .iter()
        .zip(&sums)
        .map(|(&k, s)| {
            (
                k,
                MetricValues {
                    hr: s[0].value() / n,
                    mrr: s[1].value() / n,
                    ndcg: s[2].value() / n,
                    precision: s[3].value() / n,
                    recall: s[4].value() / n,
                },
            )
        })
        .collect();
    Ok(MetricSummary {
        per_k,
        users_evaluated,
        users_skipped: rankings.len() - users_evaluated,
    })
}

/// Averages HR, MRR (truncated at K), NDCG with binary relevance, Precision
/// and Recall. Users with an empty relevant set are skipped and counted.
pub fn compute_metrics(rankings: &[Vec<usize>], relevant: &[Vec<usize>], ks: &[usize]) -> Result<MetricSummary> {
    let grades: Vec<Vec<(usize, f64)>> = relevant
        .iter()
        .map(|r| {
            let mut s: Vec<usize> = r.clone();
            s.sort_unstable();
            s.dedup();
            s.into_iter().map(|i| (i, 1.0)).collect()
        })
        .collect();
    summarize(rankings, &grades, ks, false)
}

/// As [`compute_metrics`] with NDCG gains `2^grade − 1`.
pub fn compute_metrics_graded(
    rankings: &[Vec<usize>],
    relevant: &[Vec<(usize, f64)>],
    ks: &[usize],
) -> Result<MetricSummary> {
    summarize(rankings, relevant, ks, true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolEcho {
    pub split: SplitMode,
    pub negatives: usize,
    pub ks: Vec<usize>,
    pub graded: bool,
    pub excluded_users: usize,
    pub skipped_users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub config: serde_json::Value,
    pub protocol: ProtocolEcho,
    pub users_evaluated: usize,
    pub metrics: BTreeMap<usize, MetricValues>,
    pub seed: u64,
}

impl MetricsReport {
    pub fn at(&self, k: usize) -> Option<&MetricValues> {
        self.metrics.get(&k)
    }
}

/// Ranks each held-out user's candidates with `rank` and scores the result.
pub fn evaluate_split<F>(split: &Split, protocol: &EvalProtocol, config: serde_json::Value, rank: F) -> Result<MetricsReport>
where
    F: Fn(usize, &[usize]) -> Vec<usize> + Sync,
{
    let rankings: Vec<Vec<usize>> = (0..split.held_out.len())
        .into_par_iter()
        .map(|n| rank(n, &split.candidates(n)))
        .collect();
    let relevant: Vec<Vec<(usize, f64)>> = split.held_out.iter().map(|h| vec![(h.item, h.rating)]).collect();
    let summary = summarize(&rankings, &relevant, &protocol.ks, protocol.graded)?;
    Ok(MetricsReport {
        config,
        protocol: ProtocolEcho {
            split: split.mode,
            negatives: protocol.negatives,
            ks: protocol.ks.clone(),
            graded: protocol.graded,
            excluded_users: split.excluded_users,
            skipped_users: summary.users_skipped,
        },
        users_evaluated: summary.users_evaluated,
        metrics: summary.per_k,
        seed: protocol.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Every combination of axis values.
    Factorial,
    /// Each axis value on its own, other settings at their defaults.
    OneAtATime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<String>,
}

impl Axis {
    pub fn new<S: Into<String>>(name: &str, values: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }
}

pub type Assignment = Vec<(String, String)>;

/// Cells a grid expands to.
pub fn expand(axes: &[Axis], mode: SweepMode) -> Vec<Assignment> {
    if axes.is_empty() {
        return Vec::new();
    }
    match mode {
        SweepMode::OneAtATime => axes
            .iter()
            .flat_map(|a| a.values.iter().map(move |v| vec![(a.name.clone(), v.clone())]))
            .collect(),
        SweepMode::Factorial => axes.iter().fold(vec![Vec::new()], |acc, a| {
            acc.iter()
                .flat_map(|prefix| {
                    a.values.iter().map(move |v| {
                        let mut next = prefix.clone();
                        next.push((a.name.clone(), v.clone()));
                        next
                    })
                })
                .collect()
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub assignment: Assignment,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

/// Runs `run` on every cell in order. A failing cell records its error and
/// the sweep continues.
pub fn sweep<F>(axes: &[Axis], mode: SweepMode, mut run: F) -> Vec<SweepCell>
where
    F: FnMut(&Assignment) -> Result<MetricsReport>,
{
    expand(axes, mode)
        .into_iter()
        .map(|assignment| {
            let outcome = run(&assignment);
            if let Err(e) = &outcome {
                log::warn!("sweep cell {assignment:?} failed: {e}");
            }
            let (report, error) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepCell {
                assignment,
                report,
                error,
            }
        })
        .collect()
}

/// One row per cell: axis columns, status, then five metrics per K.
pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], axes: &[Axis], ks: &[usize], mut out: W) -> Result<()> {
    let mut header: Vec<String> = axes.iter().map(|a| a.name.clone()).collect();
    header.push("status".into());
    for k in ks {
        for m in ["hr", "mrr", "ndcg", "precision", "recall"] {
            header.push(format!("{m}@{k}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for cell in cells {
        let mut row: Vec<String> = axes
            .iter()
            .map(|a| {
                cell.assignment
                    .iter()
                    .find(|(n, _)| n == &a.name)
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default()
            })
            .collect();
        match (&cell.report, &cell.error) {
            (Some(r), _) => {
                row.push("ok".into());
                for k in ks {
                    let m = r.at(*k).copied().unwrap_or_default();
                    row.extend([m.hr, m.mrr, m.ndcg, m.precision, m.recall].map(|v| format!("{v:.6}")));
                }
            }
            (None, e) => {
                let msg = e.clone().unwrap_or_default().replace([',', '\n'], ";");
                row.push(format!("error: {msg}"));
                row.extend(std::iter::repeat_n(String::new(), ks.len() * 5));
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
