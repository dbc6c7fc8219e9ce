//! End-to-end run: clean, build the hypergraph, plan batches, embed with
//! centralities, pass messages, smooth per batch, score and evaluate.
//!
//! [`Session`] caches the stages that only depend on the training store and
//! embedding settings, so sweeps over downstream settings reuse them.

mod batch;
mod config;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::centrality::{project_hypergraph, star_expansion, CentralityVector};
use crate::dynamics::{build_weights, InfluenceGraph, Lambda};
use crate::embedding::{concat_features, generate_walks, train_skipgram, ConcatWeights};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_split, expand, split, write_sweep_csv, Axis, MetricsReport, Split, SweepCell, SweepMode};
use crate::model::{
    build_co_interaction, build_co_preference, load_interactions, CoPreference, load_social, FeatureMatrix, Hypergraph,
    InteractionStore, SimpleGraph, SocialGraph,
};
use crate::preprocess::{anomaly_scores, exclude_anomalies, remove_isolated, threshold_filter, CleanReport};
use crate::propagation::propagate;
use crate::recommender::{popularity_row, score_users, top_k, ScoreTable};

pub use batch::{batch_partition, BatchPlan, SmoothingReport};
pub use config::{RunConfig, WalkGraph, DEFAULT_BATCH_SIZE, DEFAULT_GAMMA};

/// Published HR@10 on the real film-rating data; informational only.
pub const REFERENCE_HR_AT_10: f64 = 0.8604;

/// Ratings plus the optional trust network.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub store: InteractionStore,
    pub social: Option<SocialGraph>,
}

impl Dataset {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let path = cfg
            .ratings
            .as_ref()
            .ok_or_else(|| Error::Config("no ratings file configured".into()))?;
        let store = load_interactions(path, cfg.dedup)?;
        if store.is_empty() {
            return Err(Error::Empty(format!("{} holds no ratings", path.display())));
        }
        let social = cfg.trust.as_deref().map(load_social).transpose()?;
        Self { store, social }.rescaled(cfg.rescale)
    }

    /// Applies an optional source scale, mapped onto 1–5.
    pub fn rescaled(self, from: Option<(f64, f64)>) -> Result<Self> {
        match from {
            None => Ok(self),
            Some(f) => Ok(Self {
                store: self.store.rescaled(f, (1.0, 5.0))?,
                social: self.social,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageStatus {
    Done,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: &'static str,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub duplicates_collapsed: usize,
    pub social_edges: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GraphStats {
    pub hypergraph_nodes: usize,
    pub co_interaction_edges: usize,
    pub co_preference_edges: usize,
    pub social_edges_used: usize,
    pub analysis_graph_edges: usize,
    pub message_graph_edges: usize,
    pub zero_norm_rows: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BatchStats {
    pub n_batches: usize,
    pub smallest: usize,
    pub largest: usize,
    pub rounds: usize,
    pub final_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub hr_at_10: f64,
    pub binding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub dataset: DatasetStats,
    pub clean: CleanReport,
    pub graph: GraphStats,
    pub batch: BatchStats,
    pub stages: Vec<StageRecord>,
    pub metrics: Option<MetricsReport>,
    pub baseline: Option<MetricsReport>,
    pub reference: Reference,
    pub artifacts: Vec<String>,
}

impl RunReport {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            config: cfg.clone(),
            dataset: DatasetStats::default(),
            clean: CleanReport::default(),
            graph: GraphStats::default(),
            batch: BatchStats::default(),
            stages: Vec::new(),
            metrics: None,
            baseline: None,
            reference: Reference {
                hr_at_10: REFERENCE_HR_AT_10,
                binding: false,
            },
            artifacts: Vec::new(),
        }
    }

    pub fn hr_at(&self, k: usize) -> Option<f64> {
        self.metrics.as_ref()?.at(k).map(|m| m.hr)
    }

    pub fn baseline_hr_at(&self, k: usize) -> Option<f64> {
        self.baseline.as_ref()?.at(k).map(|m| m.hr)
    }
}

/// Wall time per stage, written apart from the report.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

/// Stages that depend only on the training store and embedding settings.
#[derive(Debug, Clone)]
pub struct Upstream {
    pub clean: CleanReport,
    pub hypergraph: Hypergraph,
    /// Social edges added beyond the co-interaction projection.
    pub social_used: usize,
    /// Clique projection plus social edges; centralities and smoothing use it.
    pub graph: SimpleGraph,
    pub centrality: CentralityVector,
    /// Walk embeddings, one row per node of `graph`.
    pub embedding: FeatureMatrix,
}

/// Everything from the concatenated features to the smoothed output.
#[derive(Debug, Clone)]
pub struct Downstream {
    pub features: FeatureMatrix,
    pub co_preference: Hypergraph,
    pub zero_norm_rows: usize,
    pub message_graph: SimpleGraph,
    pub propagated: FeatureMatrix,
    pub smoothed: FeatureMatrix,
    pub plan: BatchPlan,
    pub smoothing: Option<SmoothingReport>,
}

/// Upstream and downstream stages on one store, with no split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub upstream: Upstream,
    pub downstream: Downstream,
}

fn upstream_key(cfg: &RunConfig) -> String {
    format!(
        "{}|{}|{:?}|{:?}|{:?}|{:?}|{}",
        cfg.threshold, cfg.phi, cfg.window, cfg.walk_graph, cfg.walk, cfg.skipgram, cfg.seed
    )
}

fn split_key(cfg: &RunConfig) -> String {
    format!("{:?}|{}|{}", cfg.protocol.split, cfg.protocol.negatives, cfg.seed)
}

struct Tracker<'a> {
    report: &'a mut RunReport,
    timings: &'a mut Timings,
}

impl Tracker<'_> {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings.stages.push((stage.to_owned(), start.elapsed().as_secs_f64()));
        match out {
            Ok(v) => {
                self.done(stage, None);
                Ok(v)
            }
            Err(e) => {
                self.report.stages.push(StageRecord {
                    stage,
                    status: StageStatus::Failed,
                    detail: Some(e.to_string()),
                });
                Err(e.in_stage(stage))
            }
        }
    }

    fn done(&mut self, stage: &'static str, detail: Option<String>) {
        self.report.stages.push(StageRecord {
            stage,
            status: StageStatus::Done,
            detail,
        });
    }

    fn skipped(&mut self, stage: &'static str, reason: &str) {
        self.report.stages.push(StageRecord {
            stage,
            status: StageStatus::Skipped,
            detail: Some(reason.to_owned()),
        });
    }
}

/// Social edges among the hypergraph's nodes, in graph index space.
fn social_pairs(social: Option<&SocialGraph>, g: &SimpleGraph) -> Vec<(usize, usize)> {
    let Some(s) = social else { return Vec::new() };
    let index = g.label_index();
    let mut pairs: Vec<(usize, usize)> = s
        .named_edges()
        .filter_map(|(a, b, _)| Some((*index.get(a)?, *index.get(b)?)))
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Results of one run that sweeps and the CLI look into.
pub struct RunOutput {
    pub report: RunReport,
    pub timings: Timings,
    pub features: Option<FeatureMatrix>,
    pub scores: Option<ScoreTable>,
    pub split: Option<Arc<Split>>,
}

/// A dataset with cached splits and upstream stages.
pub struct Session {
    data: Dataset,
    splits: HashMap<String, Arc<Split>>,
    upstream: HashMap<String, Arc<Upstream>>,
}

impl Session {
    pub fn new(data: Dataset) -> Self {
        Self {
            data,
            splits: HashMap::new(),
            upstream: HashMap::new(),
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    fn effective(cfg: &RunConfig) -> RunConfig {
        let mut c = cfg.clone();
        c.protocol.seed = cfg.seed;
        c.propagation.seed = cfg.seed;
        c
    }

    /// Runs every stage. On failure the error names the stage and `out`, when
    /// given, still receives the partial report.
    pub fn run(&mut self, cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutput> {
        let cfg = Self::effective(cfg);
        let mut report = RunReport::new(&cfg);
        let mut timings = Timings::default();
        let result = self.run_stages(&cfg, &mut report, &mut timings, out);
        if let Some(dir) = out {
            write_report(dir, &report, &timings)?;
        }
        let (features, scores, split) = result?;
        Ok(RunOutput {
            report,
            timings,
            features: Some(features),
            scores: Some(scores),
            split: Some(split),
        })
    }

    #[allow(clippy::type_complexity)]
    fn run_stages(
        &mut self,
        cfg: &RunConfig,
        report: &mut RunReport,
        timings: &mut Timings,
        out: Option<&Path>,
    ) -> Result<(FeatureMatrix, ScoreTable, Arc<Split>)> {
        let mut t = Tracker { report, timings };
        t.run("validate", || cfg.validate())?;
        let store = &self.data.store;
        t.report.dataset = DatasetStats {
            users: store.num_users(),
            items: store.num_items(),
            ratings: store.len(),
            duplicates_collapsed: store.duplicates_collapsed(),
            social_edges: self.data.social.as_ref().map_or(0, |s| s.edges().len()),
        };

        let skey = split_key(cfg);
        let sp = match self.splits.get(&skey) {
            Some(s) => {
                t.done("split", Some("cached".into()));
                s.clone()
            }
            None => {
                let s = Arc::new(t.run("split", || split(store, &cfg.protocol))?);
                self.splits.insert(skey, s.clone());
                s
            }
        };

        let ukey = upstream_key(cfg);
        let up = match self.upstream.get(&ukey) {
            Some(u) => {
                for stage in ["clean", "hypergraph", "centrality", "embed"] {
                    t.done(stage, Some("cached".into()));
                }
                u.clone()
            }
            None => {
                let u = Arc::new(build_upstream(cfg, &sp.train, self.data.social.as_ref(), &mut t)?);
                self.upstream.insert(ukey, u.clone());
                u
            }
        };
        t.report.clean = up.clean.clone();
        let stats = up.hypergraph.stats();
        t.report.graph.hypergraph_nodes = stats.nodes;
        t.report.graph.co_interaction_edges = stats.co_interaction;
        t.report.graph.social_edges_used = up.social_used;
        t.report.graph.analysis_graph_edges = up.graph.num_edges();

        let down = downstream(cfg, &up, &mut t)?;
        t.report.batch.n_batches = down.plan.partitions.len();
        t.report.batch.smallest = down.plan.partitions.iter().map(Vec::len).min().unwrap_or(0);
        t.report.batch.largest = down.plan.partitions.iter().map(Vec::len).max().unwrap_or(0);
        if let Some(rep) = down.smoothing {
            t.report.batch.rounds = rep.rounds;
            t.report.batch.final_delta = rep.final_delta;
        }
        t.report.graph.co_preference_edges = down.co_preference.stats().co_preference;
        t.report.graph.zero_norm_rows = down.zero_norm_rows;
        t.report.graph.message_graph_edges = down.message_graph.num_edges();
        let smoothed = &down.smoothed;

        let users: Vec<usize> = sp.held_out.iter().map(|h| h.user).collect();
        let scores = t.run("score", || score_users(&users, smoothed, &sp.train, cfg.similarity, cfg.threshold))?;

        let echo = serde_json::to_value(cfg)?;
        let (metrics, baseline) = t.run("evaluate", || {
            let m = evaluate_split(&sp, &cfg.protocol, echo.clone(), |n, cands| scores.rows[n].rank(cands))?;
            let b = evaluate_split(&sp, &cfg.protocol, serde_json::json!({ "baseline": "popularity" }), |n, cands| {
                popularity_row(sp.held_out[n].user, &sp.train).rank(cands)
            })?;
            Ok((m, b))
        })?;
        t.report.metrics = Some(metrics);
        t.report.baseline = Some(baseline);

        if let Some(dir) = out {
            let files = t.run("artifacts", || write_artifacts(dir, &up, &down.co_preference, smoothed, &scores, &sp, cfg))?;
            t.report.artifacts = files;
        } else {
            t.skipped("artifacts", "no output directory");
        }
        Ok((down.smoothed, scores, sp))
    }

    /// Runs every cell of a grid over configuration keys. Failing cells are
    /// recorded and the sweep goes on.
    pub fn sweep(&mut self, base: &RunConfig, axes: &[Axis], mode: SweepMode) -> Result<Vec<SweepCell>> {
        for a in axes {
            if !SWEEP_AXES.contains(&a.name.as_str()) {
                return Err(Error::Config(format!(
                    "`{}` is not a sweep axis; expected one of {SWEEP_AXES:?}",
                    a.name
                )));
            }
        }
        let cells = expand(axes, mode);
        let mut out = Vec::with_capacity(cells.len());
        for assignment in cells {
            let mut cfg = base.clone();
            let outcome = assignment
                .iter()
                .try_for_each(|(k, v)| cfg.set(k, v))
                .and_then(|_| self.run(&cfg, None));
            let (report, error) = match outcome {
                Ok(o) => (o.report.metrics, None),
                Err(e) => {
                    log::warn!("sweep cell {assignment:?} failed: {e}");
                    (None, Some(e.to_string()))
                }
            };
            out.push(SweepCell {
                assignment,
                report,
                error,
            });
        }
        Ok(out)
    }
}

/// Keys a sweep may vary.
pub const SWEEP_AXES: &[&str] = &[
    "centrality",
    "propagation.variant",
    "threshold",
    "metric",
    "batch_size",
    "embed.dim",
    "lambda",
];

/// The ablation axes, meant for one-at-a-time mode.
pub fn ablation_axes() -> Vec<Axis> {
    vec![
        Axis::new("centrality", ["on", "off"]),
        Axis::new("propagation.variant", ["gat", "gcn", "gin", "gin-sl"]),
        Axis::new("threshold", ["1", "2", "3", "4", "5"]),
        Axis::new("metric", ["euclidean", "jaccard", "cosine"]),
    ]
}

/// The 64-cell λ grid as a single axis.
pub fn lambda_axis() -> Axis {
    Axis::new(
        "lambda",
        Lambda::grid().iter().map(|l| format!("{}:{}:{}", l.0[0], l.0[1], l.0[2])),
    )
}

pub fn batch_size_axis() -> Axis {
    Axis::new("batch_size", ["16", "32", "64", "128", "256", "512"])
}

/// Threshold filter, then anomaly exclusion, then index compaction.
pub fn clean_store(cfg: &RunConfig, store: &InteractionStore) -> Result<(InteractionStore, CleanReport)> {
    let above = threshold_filter(store, cfg.threshold)?;
    if above.is_empty() {
        return Err(Error::Empty(format!("no rating reaches the threshold {}", cfg.threshold)));
    }
    let scores = anomaly_scores(&above)?;
    let flagged = scores.flagged(cfg.phi);
    let kept = exclude_anomalies(&above, &scores, cfg.phi)?.compact();
    let report = CleanReport {
        input_entries: store.len(),
        removed_duplicates: store.duplicates_collapsed(),
        removed_below_threshold: store.len() - above.len(),
        removed_anomalous_entries: above.len() - kept.len(),
        flagged_anomalies: flagged,
        removed_isolated: 0,
        kept_entries: kept.len(),
    };
    Ok((kept, report))
}

/// The co-interaction hypergraph without isolated users, and its clique
/// projection joined with the social edges.
#[derive(Debug, Clone)]
pub struct Graphs {
    pub hypergraph: Hypergraph,
    pub graph: SimpleGraph,
    pub social_used: usize,
    pub removed_isolated: usize,
}

pub fn build_graphs(cfg: &RunConfig, cleaned: &InteractionStore, social: Option<&SocialGraph>) -> Result<Graphs> {
    let raw = build_co_interaction(cleaned, cfg.window)?;
    let (hypergraph, iso) = remove_isolated(&raw);
    if hypergraph.num_nodes() == 0 {
        return Err(Error::Empty("no two users share an item".into()));
    }
    let projected = project_hypergraph(&hypergraph);
    let pairs = social_pairs(social, &projected);
    let social_used = pairs.iter().filter(|&&(a, b)| !projected.has_edge(a, b)).count();
    Ok(Graphs {
        graph: projected.with_extra_edges(pairs),
        hypergraph,
        social_used,
        removed_isolated: iso.removed_isolated,
    })
}

/// Walk embeddings for the nodes of `g.graph`, trained on the configured
/// walk graph.
pub fn embed_users(cfg: &RunConfig, g: &Graphs, social: Option<&SocialGraph>) -> Result<FeatureMatrix> {
    let walk_graph = match cfg.walk_graph {
        WalkGraph::Clique => g.graph.clone(),
        WalkGraph::Star => {
            let star = star_expansion(&g.hypergraph);
            let pairs = social_pairs(social, &star);
            star.with_extra_edges(pairs)
        }
    };
    let corpus = generate_walks(&walk_graph, cfg.walk, cfg.seed)?;
    let table = train_skipgram(&corpus, cfg.skipgram, cfg.seed)?;
    Ok(table.vectors.select(g.graph.labels()).0)
}

fn build_upstream(
    cfg: &RunConfig,
    train: &InteractionStore,
    social: Option<&SocialGraph>,
    t: &mut Tracker<'_>,
) -> Result<Upstream> {
    let (cleaned, mut clean) = t.run("clean", || clean_store(cfg, train))?;
    let g = t.run("hypergraph", || build_graphs(cfg, &cleaned, social))?;
    clean.removed_isolated = g.removed_isolated;
    let centrality = t.run("centrality", || Ok(CentralityVector::compute(&g.graph)))?;
    let embedding = t.run("embed", || embed_users(cfg, &g, social))?;
    Ok(Upstream {
        clean,
        hypergraph: g.hypergraph,
        social_used: g.social_used,
        graph: g.graph,
        centrality,
        embedding,
    })
}

fn downstream(cfg: &RunConfig, up: &Upstream, t: &mut Tracker<'_>) -> Result<Downstream> {
    let plan = t.run("batch", || {
        batch_partition(&up.hypergraph, cfg.batches_for(up.graph.num_nodes()), cfg.max_iter, cfg.batch_eps)
    })?;
    let weights = ConcatWeights {
        embedding: cfg.concat.embedding,
        centrality: if cfg.use_centrality { cfg.concat.centrality } else { 0.0 },
    };
    let features = t.run("concat", || concat_features(&up.embedding, &up.centrality, weights))?;
    let (message_graph, cp) = t.run("co-preference", || message_graph(&up.graph, &features, cfg.gamma))?;
    let propagated = t.run("propagate", || {
        let layers = propagate(&features, &message_graph, &cfg.propagation)?;
        Ok(layers.into_iter().last().expect("layer 0 is always present"))
    })?;
    let (smoothed, smoothing) = if cfg.max_iter == 0 {
        t.skipped("smooth", "max_iter = 0");
        (propagated.clone(), None)
    } else {
        let (h, rep) = t.run("smooth", || {
            let w = build_weights(&InfluenceGraph::from_simple(&up.graph), &up.centrality, cfg.lambda, cfg.eta)?;
            plan.smooth(&w.matrix, &propagated)
        })?;
        (h, Some(rep))
    };
    Ok(Downstream {
        features,
        zero_norm_rows: cp.zero_norm.len(),
        co_preference: cp.hypergraph,
        message_graph,
        propagated,
        smoothed,
        plan,
        smoothing,
    })
}

/// `graph` plus the projected co-preference hyperedges of `features`, whose
/// rows must follow `graph`'s node order.
pub fn message_graph(graph: &SimpleGraph, features: &FeatureMatrix, gamma: f64) -> Result<(SimpleGraph, CoPreference)> {
    if features.labels() != graph.labels() {
        return Err(Error::Config("feature rows do not follow the graph's node order".into()));
    }
    let cp = build_co_preference(features, gamma)?;
    let pairs = project_hypergraph(&cp.hypergraph);
    let extra: Vec<(usize, usize)> = pairs.edges().collect();
    Ok((graph.with_extra_edges(extra), cp))
}

/// Runs the stages from cleaning through smoothing on the whole store.
/// Errors name the failing stage.
pub fn prepare(cfg: &RunConfig, data: &Dataset) -> Result<Prepared> {
    let cfg = Session::effective(cfg);
    cfg.validate()?;
    let mut report = RunReport::new(&cfg);
    let mut timings = Timings::default();
    let mut t = Tracker {
        report: &mut report,
        timings: &mut timings,
    };
    let upstream = build_upstream(&cfg, &data.store, data.social.as_ref(), &mut t)?;
    let downstream = downstream(&cfg, &upstream, &mut t)?;
    Ok(Prepared { upstream, downstream })
}

fn write_report(dir: &Path, report: &RunReport, timings: &Timings) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    fs::write(dir.join("timings.json"), serde_json::to_string_pretty(timings)? + "\n")?;
    Ok(())
}

fn write_artifacts(
    dir: &Path,
    up: &Upstream,
    co_pref: &Hypergraph,
    features: &FeatureMatrix,
    scores: &ScoreTable,
    sp: &Split,
    cfg: &RunConfig,
) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let create = |name: &str| -> Result<std::io::BufWriter<fs::File>> {
        Ok(std::io::BufWriter::new(fs::File::create(dir.join(name))?))
    };
    up.hypergraph.merge(co_pref).write_text(create("hypergraph.txt")?)?;
    up.centrality.write_csv(create("centrality.csv")?)?;
    up.embedding.write_text(create("embeddings.txt")?)?;
    features.write_text(create("features.txt")?)?;
    let k = cfg.protocol.ks.iter().copied().max().unwrap_or(10);
    write_recommendations(create("recommendations.txt")?, scores, &sp.train, k)?;
    Ok(["hypergraph.txt", "centrality.csv", "embeddings.txt", "features.txt", "recommendations.txt"]
        .map(String::from)
        .to_vec())
}

/// `user item score rank` lines, ranks from 1.
pub fn write_recommendations<W: std::io::Write>(
    mut out: W,
    scores: &ScoreTable,
    store: &InteractionStore,
    k: usize,
) -> Result<()> {
    for row in &scores.rows {
        for (rank, (item, s)) in top_k(row, k)?.into_iter().enumerate() {
            writeln!(
                out,
                "{} {} {:.6} {}",
                store.users().name(row.user),
                store.items().name(item),
                s,
                rank + 1
            )?;
        }
    }
    Ok(())
}

/// Loads the configured files and runs once.
pub fn run_pipeline(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutput> {
    let data = match Dataset::load(cfg) {
        Ok(d) => d,
        Err(e) => {
            let e = e.in_stage("load");
            if let Some(dir) = out {
                let mut report = RunReport::new(cfg);
                report.stages.push(StageRecord {
                    stage: "load",
                    status: StageStatus::Failed,
                    detail: Some(e.to_string()),
                });
                write_report(dir, &report, &Timings::default())?;
            }
            return Err(e);
        }
    };
    Session::new(data).run(cfg, out)
}

/// Writes a sweep table as CSV to `path`.
pub fn write_sweep(path: &PathBuf, cells: &[SweepCell], axes: &[Axis], ks: &[usize]) -> Result<()> {
    let f = std::io::BufWriter::new(fs::File::create(path)?);
    write_sweep_csv(cells, axes, ks, f)
}
