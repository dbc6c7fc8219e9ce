//! Configuration assembly, output routing and the small text formats the
//! simulators read.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use cyberswarm::dynamics::{InfluenceGraph, LayeredGraph};
use cyberswarm::model::load_social;
use cyberswarm::pipeline::RunConfig;
use cyberswarm::{Error, IdMap};

use crate::Global;

const P0_STREAM: u64 = 0x5030;

/// File values first, then `--ratings/--trust`, then `--set`, then `--seed`.
pub fn config(g: &Global) -> anyhow::Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(r) = &g.ratings {
        cfg.ratings = Some(r.clone());
    }
    if let Some(t) = &g.trust {
        cfg.trust = Some(t.clone());
    }
    for kv in &g.set {
        cfg.apply_override(kv)?;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Sets `key` when the flag was given.
pub fn set_opt<T: ToString>(cfg: &mut RunConfig, key: &str, v: &Option<T>) -> cyberswarm::Result<()> {
    match v {
        Some(v) => cfg.set(key, &v.to_string()),
        None => Ok(()),
    }
}

/// Writes named outputs into a directory, or all of them to stdout.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> anyhow::Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
        })
    }

    pub fn emit<F>(&self, name: &str, f: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> cyberswarm::Result<()>,
    {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                let mut w = BufWriter::new(file);
                f(&mut w)?;
                w.flush()?;
                log::info!("wrote {}", path.display());
            }
            None => {
                let stdout = std::io::stdout();
                let mut w = BufWriter::new(stdout.lock());
                f(&mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    }

    /// Like [`Sink::emit`], but skipped when writing to stdout.
    pub fn aux<F>(&self, name: &str, f: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> cyberswarm::Result<()>,
    {
        match self.dir {
            Some(_) => self.emit(name, f),
            None => Ok(()),
        }
    }

    pub fn aux_json<T: serde::Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        match self.dir {
            Some(_) => self.json(name, value),
            None => Ok(()),
        }
    }

    pub fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        self.emit(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

/// Arcs `source target` where `target` influences `source`.
pub fn influence_graph(path: &Path) -> anyhow::Result<InfluenceGraph> {
    let s = load_social(path)?;
    let labels = s.nodes().names().to_vec();
    Ok(InfluenceGraph::from_arcs(labels, s.edges().iter().map(|e| (e.source, e.target))))
}

fn two_columns(path: &Path) -> anyhow::Result<Vec<(usize, String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: format!("expected two fields, found {}", f.len()),
            }
            .into());
        }
        out.push((n + 1, f[0].to_owned(), f[1].to_owned()));
    }
    Ok(out)
}

/// Initial preferences aligned with `labels`, from a `node value` file or a
/// seeded uniform draw.
pub fn initial_state(path: Option<&Path>, labels: &[String], seed: u64) -> anyhow::Result<Vec<f64>> {
    let Some(path) = path else {
        return Ok(cyberswarm::rng::uniform_vec(seed, &[P0_STREAM], labels.len()));
    };
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut p = vec![f64::NAN; labels.len()];
    for (line, node, value) in two_columns(path)? {
        let parse = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let v: f64 = value.parse().map_err(|_| parse(format!("`{value}` is not a number")))?;
        if !v.is_finite() {
            return Err(parse(format!("`{value}` is not finite")).into());
        }
        let i = *index
            .get(node.as_str())
            .ok_or_else(|| parse(format!("node `{node}` is not in the graph")))?;
        p[i] = v;
    }
    if let Some(i) = p.iter().position(|x| x.is_nan()) {
        return Err(Error::Config(format!("{} has no value for node `{}`", path.display(), labels[i])).into());
    }
    Ok(p)
}

/// Layer assignment from a `node layer` file; arcs between layers become
/// vertical, the rest horizontal.
pub fn layered_graph(graph: &Path, layers: &Path, rho_v: f64) -> anyhow::Result<LayeredGraph> {
    let rows = two_columns(layers)?;
    let names = IdMap::from_sorted_names(rows.iter().map(|r| r.1.clone()));
    let layer_names: BTreeSet<&str> = rows.iter().map(|r| r.2.as_str()).collect();
    let layer_ids: Vec<&str> = layer_names.into_iter().collect();
    let mut layer_of = vec![usize::MAX; names.len()];
    for (line, node, layer) in &rows {
        let v = names.get(node).expect("interned");
        let l = layer_ids.binary_search(&layer.as_str()).expect("collected");
        if layer_of[v] != usize::MAX && layer_of[v] != l {
            return Err(Error::Parse {
                path: layers.to_path_buf(),
                line: *line,
                message: format!("node `{node}` is assigned to two layers"),
            }
            .into());
        }
        layer_of[v] = l;
    }
    let s = load_social(graph)?;
    let (mut horizontal, mut vertical) = (Vec::new(), Vec::new());
    for (a, b, _) in s.named_edges() {
        let missing = |n: &str| Error::Config(format!("node `{n}` of {} has no layer", graph.display()));
        let i = names.get(a).ok_or_else(|| missing(a))?;
        let j = names.get(b).ok_or_else(|| missing(b))?;
        if layer_of[i] == layer_of[j] {
            horizontal.push((i, j));
        } else {
            vertical.push((i, j));
        }
    }
    Ok(LayeredGraph::new(names.names().to_vec(), layer_of, horizontal, vertical, rho_v)?)
}
