//! One function per subcommand.

use std::io::BufReader;

use anyhow::Context;
use cyberswarm::benchfns::{multistart_optimize, Objective, CSV_HEADER};
use cyberswarm::centrality::CentralityVector;
use cyberswarm::dynamics::{build_weights, simulate_cehs, simulate_dcse, SimulationOptions};
use cyberswarm::evaluation::{write_sweep_csv, Axis, SweepMode};
use cyberswarm::model::{load_social, FeatureMatrix, SimpleGraph};
use cyberswarm::oracles::{oracle_centrality, oracle_equilibrium};
use cyberswarm::pipeline::{
    ablation_axes, batch_size_axis, build_graphs, clean_store, embed_users, lambda_axis, message_graph, prepare,
    run_pipeline, write_recommendations, Dataset, Graphs, RunConfig, Session,
};
use cyberswarm::propagation::propagate;
use cyberswarm::recommender::score_users;
use cyberswarm::Error;
use serde_json::json;

use crate::inputs::{self, set_opt, Sink};
use crate::{
    BenchArgs, CehsArgs, Command, DynamicsArgs, EmbedArgs, Global, Mode, OracleArgs, OracleKind, Preset,
    PropagateArgs, RecommendArgs, SweepArgs,
};

pub fn dispatch(g: &Global, cmd: Command) -> anyhow::Result<()> {
    if let Some(n) = g.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting the worker pool")?;
    }
    let mut cfg = inputs::config(g)?;
    let sink = Sink::new(g.out.as_deref())?;
    match cmd {
        Command::Preprocess => preprocess(&cfg, &sink),
        Command::Hypergraph { with_co_preference } => hypergraph(&cfg, with_co_preference, &sink),
        Command::Centrality => centrality(&cfg, &sink),
        Command::Embed(a) => embed(&mut cfg, &a, &sink),
        Command::Propagate(a) => propagate_cmd(&mut cfg, &a, &sink),
        Command::Recommend(a) => recommend(&mut cfg, &a, &sink),
        Command::Evaluate => evaluate(&cfg, &sink),
        Command::Sweep(a) => sweep(&cfg, &a, &sink),
        Command::SimulateDcse(a) => dcse(&mut cfg, &a, &sink),
        Command::SimulateCehs(a) => cehs(&mut cfg, &a, &sink),
        Command::BenchFns(a) => bench(&cfg, &a, &sink),
        Command::Run => run(&cfg, g),
        Command::Oracle(a) => oracle(&mut cfg, &a, &sink),
    }
}

fn load(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    cfg.validate()?;
    Ok(Dataset::load(cfg).map_err(|e| e.in_stage("load"))?)
}

fn graphs(cfg: &RunConfig, data: &Dataset) -> anyhow::Result<Graphs> {
    let (kept, _) = clean_store(cfg, &data.store)?;
    Ok(build_graphs(cfg, &kept, data.social.as_ref())?)
}

fn preprocess(cfg: &RunConfig, sink: &Sink) -> anyhow::Result<()> {
    let data = load(cfg)?;
    let (kept, report) = clean_store(cfg, &data.store)?;
    sink.emit("clean.txt", |w| kept.write_to(w))?;
    sink.aux_json("clean.json", &report)
}

fn hypergraph(cfg: &RunConfig, with_co_preference: bool, sink: &Sink) -> anyhow::Result<()> {
    let data = load(cfg)?;
    let h = if with_co_preference {
        let p = prepare(cfg, &data)?;
        p.upstream.hypergraph.merge(&p.downstream.co_preference)
    } else {
        graphs(cfg, &data)?.hypergraph
    };
    sink.emit("hypergraph.txt", |w| h.write_text(w))?;
    sink.aux_json("hypergraph.json", &h.stats())
}

fn centrality(cfg: &RunConfig, sink: &Sink) -> anyhow::Result<()> {
    let data = load(cfg)?;
    let g = graphs(cfg, &data)?;
    let c = CentralityVector::compute(&g.graph);
    sink.emit("centrality.csv", |w| c.write_csv(w))
}

fn embed(cfg: &mut RunConfig, a: &EmbedArgs, sink: &Sink) -> anyhow::Result<()> {
    set_opt(cfg, "embed.dim", &a.dim)?;
    set_opt(cfg, "walk.length", &a.walk_len)?;
    set_opt(cfg, "walk.per_node", &a.walks_per_node)?;
    set_opt(cfg, "walk.p", &a.p)?;
    set_opt(cfg, "walk.q", &a.q)?;
    set_opt(cfg, "embed.window", &a.window)?;
    set_opt(cfg, "embed.negatives", &a.negatives)?;
    set_opt(cfg, "embed.epochs", &a.epochs)?;
    let data = load(cfg)?;
    let g = graphs(cfg, &data)?;
    let e = embed_users(cfg, &g, data.social.as_ref())?;
    sink.emit("embeddings.txt", |w| e.write_text(w))
}

fn propagate_cmd(cfg: &mut RunConfig, a: &PropagateArgs, sink: &Sink) -> anyhow::Result<()> {
    set_opt(cfg, "propagation.variant", &a.variant)?;
    set_opt(cfg, "propagation.layers", &a.layers)?;
    let data = load(cfg)?;
    let out = match &a.features {
        None => prepare(cfg, &data)?.downstream.propagated,
        Some(path) => {
            let file = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
            let given = FeatureMatrix::read_text(BufReader::new(file), path)?;
            let g = graphs(cfg, &data)?;
            let (h0, missing) = given.select(g.graph.labels());
            if !missing.is_empty() {
                return Err(Error::NodeSetMismatch {
                    only_left: Vec::new(),
                    only_right: missing,
                }
                .into());
            }
            let (mp, _) = message_graph(&g.graph, &h0, cfg.gamma)?;
            let mut pcfg = cfg.propagation;
            pcfg.seed = cfg.seed;
            propagate(&h0, &mp, &pcfg)?.pop().expect("layer 0 is always present")
        }
    };
    sink.emit("features.txt", |w| out.write_text(w))
}

fn recommend(cfg: &mut RunConfig, a: &RecommendArgs, sink: &Sink) -> anyhow::Result<()> {
    set_opt(cfg, "metric", &a.metric)?;
    set_opt(cfg, "neighbors", &a.neighbors)?;
    if a.topk < 1 {
        return Err(Error::Config("--topk must be at least 1".into()).into());
    }
    let data = load(cfg)?;
    let p = prepare(cfg, &data)?;
    let users: Vec<usize> = (0..data.store.num_users()).collect();
    let table = score_users(&users, &p.downstream.smoothed, &data.store, cfg.similarity, cfg.threshold)?;
    sink.emit("recommendations.txt", |w| write_recommendations(w, &table, &data.store, a.topk))
}

fn evaluate(cfg: &RunConfig, sink: &Sink) -> anyhow::Result<()> {
    let data = load(cfg)?;
    let out = Session::new(data).run(cfg, None)?;
    let r = out.report;
    sink.json(
        "metrics.json",
        &json!({ "metrics": r.metrics, "baseline": r.baseline, "reference": r.reference }),
    )
}

fn sweep(cfg: &RunConfig, a: &SweepArgs, sink: &Sink) -> anyhow::Result<()> {
    let axes: Vec<Axis> = if a.axis.is_empty() {
        match a.preset {
            Preset::Ablation => ablation_axes(),
            Preset::Lambda => vec![lambda_axis()],
            Preset::BatchSize => vec![batch_size_axis()],
        }
    } else {
        a.axis
            .iter()
            .map(|s| {
                let (name, values) = s
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("axis `{s}` is not name=v1,v2,…")))?;
                Ok(Axis::new(name.trim(), values.split(',').map(str::trim)))
            })
            .collect::<cyberswarm::Result<_>>()?
    };
    let mode = match a.mode {
        Mode::Factorial => SweepMode::Factorial,
        Mode::OneAtATime => SweepMode::OneAtATime,
    };
    let data = load(cfg)?;
    let cells = Session::new(data).sweep(cfg, &axes, mode)?;
    let failed = cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} cells failed", cells.len());
    }
    sink.emit("sweep.csv", |w| write_sweep_csv(&cells, &axes, &cfg.protocol.ks, w))
}

fn dynamics_setup(cfg: &mut RunConfig, a: &DynamicsArgs) -> anyhow::Result<SimulationOptions> {
    set_opt(cfg, "lambda", &a.lambda)?;
    set_opt(cfg, "eta", &a.eta)?;
    Ok(SimulationOptions {
        t_max: a.t_max,
        tol: a.tol,
        ..SimulationOptions::default()
    })
}

fn not_converged(steps: usize, spread: Option<f64>) -> anyhow::Error {
    Error::NotConverged {
        iterations: steps,
        residual: spread.unwrap_or(f64::NAN),
    }
    .into()
}

fn dcse(cfg: &mut RunConfig, a: &DynamicsArgs, sink: &Sink) -> anyhow::Result<()> {
    let opts = dynamics_setup(cfg, a)?;
    let path = a
        .graph
        .clone()
        .or_else(|| cfg.trust.clone())
        .ok_or_else(|| Error::Config("no graph: pass --graph or configure a trust file".into()))?;
    let g = inputs::influence_graph(&path)?;
    let cent = CentralityVector::compute(&g.symmetrized());
    let p0 = inputs::initial_state(a.p0.as_deref(), g.labels(), cfg.seed)?;
    let out = simulate_dcse(&g, &cent, cfg.lambda, cfg.eta, &p0, opts)?;
    sink.aux("trajectory.csv", |w| out.write_trajectory_csv(w))?;
    sink.json(
        "verdict.json",
        &json!({
            "labels": g.labels(),
            "lambda": cfg.lambda,
            "eta": cfg.eta,
            "steps": out.steps,
            "converged": out.converged,
            "primitivity": out.primitivity,
            "pi": out.pi,
            "components": out.components,
            "max_error": out.max_error(),
        }),
    )?;
    if !out.converged {
        return Err(not_converged(out.steps, out.trajectory.last().map(|r| r.spread)));
    }
    Ok(())
}

fn cehs(cfg: &mut RunConfig, a: &CehsArgs, sink: &Sink) -> anyhow::Result<()> {
    let opts = dynamics_setup(cfg, &a.dynamics)?;
    let path = a
        .dynamics
        .graph
        .clone()
        .or_else(|| cfg.trust.clone())
        .ok_or_else(|| Error::Config("no graph: pass --graph or configure a trust file".into()))?;
    let lg = inputs::layered_graph(&path, &a.layers, a.rho_v)?;
    let cent = CentralityVector::compute(&lg.symmetrized());
    let p0 = inputs::initial_state(a.dynamics.p0.as_deref(), lg.labels(), cfg.seed)?;
    let out = simulate_cehs(&lg, &cent, cfg.lambda, cfg.eta, &p0, opts)?;
    let d = &out.dynamics;
    sink.aux("trajectory.csv", |w| d.write_trajectory_csv(w))?;
    sink.json(
        "verdict.json",
        &json!({
            "labels": lg.labels(),
            "layers": lg.layers(),
            "rho_v": lg.rho_v,
            "lambda": cfg.lambda,
            "eta": cfg.eta,
            "steps": d.steps,
            "converged": d.converged,
            "primitivity": d.primitivity,
            "pi": d.pi,
            "components": d.components,
            "max_error": d.max_error(),
            "weak_layers": out.weak_layers,
            "first_intra_below_tol": out.first_intra_below_tol,
            "first_inter_below_tol": out.first_inter_below_tol,
        }),
    )?;
    if !d.converged {
        return Err(not_converged(d.steps, d.trajectory.last().map(|r| r.spread)));
    }
    Ok(())
}

fn bench(cfg: &RunConfig, a: &BenchArgs, sink: &Sink) -> anyhow::Result<()> {
    let objectives = match &a.function {
        Some(name) => vec![name.parse::<Objective>()?],
        None => Objective::ALL.to_vec(),
    };
    let results = objectives
        .into_iter()
        .map(|o| multistart_optimize(o, a.dim, a.restarts, a.budget, cfg.seed))
        .collect::<cyberswarm::Result<Vec<_>>>()?;
    sink.emit("bench.csv", |w| {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &results {
            writeln!(w, "{}", r.csv_line())?;
        }
        Ok(())
    })
}

fn run(cfg: &RunConfig, g: &Global) -> anyhow::Result<()> {
    let out = run_pipeline(cfg, g.out.as_deref())?;
    if g.out.is_none() {
        Sink::new(None)?.json("report.json", &out.report)?;
    }
    Ok(())
}

fn oracle(cfg: &mut RunConfig, a: &OracleArgs, sink: &Sink) -> anyhow::Result<()> {
    set_opt(cfg, "lambda", &a.lambda)?;
    set_opt(cfg, "eta", &a.eta)?;
    match a.kind {
        OracleKind::Centrality => {
            let s = load_social(&a.graph)?;
            let g = SimpleGraph::from_edges(
                s.nodes().names().to_vec(),
                s.edges().iter().map(|e| (e.source, e.target)),
            );
            let r = oracle_centrality(&g)?;
            sink.json("oracle.json", &json!({ "labels": g.labels(), "result": r }))
        }
        OracleKind::Equilibrium => {
            let g = inputs::influence_graph(&a.graph)?;
            let cent = CentralityVector::compute(&g.symmetrized());
            let w = build_weights(&g, &cent, cfg.lambda, cfg.eta)?;
            let r = oracle_equilibrium(&w.matrix.to_dense())?;
            sink.json("oracle.json", &json!({ "labels": g.labels(), "result": r }))
        }
    }
}
