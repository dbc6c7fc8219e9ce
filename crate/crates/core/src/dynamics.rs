//! Consensus dynamics on row-stochastic propagation matrices.
//!
//! `W = (1−η)I + ηA` where row `i` of `A` spreads weight over the influencers
//! of `i` in proportion to their λ-mixed centralities. Simulation iterates
//! `P ← WP`; the predicted limit is `πᵀP(0)` with `π` the left Perron vector,
//! computed separately on every weakly connected component.

use std::io::Write;

use serde::Serialize;

use crate::centrality::CentralityVector;
use crate::error::{Error, Result};
use crate::model::SimpleGraph;

pub const DEFAULT_ETA: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_T_MAX: usize = 100_000;
pub const DEFAULT_RHO_V: f64 = 0.2;
pub const EXACT_PRIMITIVE_CAP: usize = 12;
pub const EQUILIBRIUM_TOL: f64 = 1e-12;
pub const EQUILIBRIUM_MAX_ITER: usize = 1_000_000;
const ROW_SUM_TOL: f64 = 1e-12;

/// Mixing weights for (degree, closeness, betweenness).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lambda(pub [f64; 3]);

impl Default for Lambda {
    fn default() -> Self {
        Lambda([1.0 / 3.0; 3])
    }
}

impl Lambda {
    pub fn new(degree: f64, closeness: f64, betweenness: f64) -> Result<Self> {
        let l = [degree, closeness, betweenness];
        if l.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config(format!("lambda {l:?} must be finite and nonnegative")));
        }
        Ok(Lambda(l))
    }

    /// The 4 × 4 × 4 grid over {0.1, 0.3, 0.6, 0.9}.
    pub fn grid() -> Vec<Lambda> {
        const VALUES: [f64; 4] = [0.1, 0.3, 0.6, 0.9];
        let mut out = Vec::with_capacity(64);
        for a in VALUES {
            for b in VALUES {
                for c in VALUES {
                    out.push(Lambda([a, b, c]));
                }
            }
        }
        out
    }
}

/// Directed influence pattern: `influencers(i)` are the nodes whose state
/// enters row `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceGraph {
    labels: Vec<String>,
    rows: Vec<Vec<usize>>,
}

impl InfluenceGraph {
    /// Arc `(i, j)` means `j` influences `i`. Self arcs and repeats are dropped.
    pub fn from_arcs<I>(labels: Vec<String>, arcs: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = labels.len();
        let mut rows = vec![Vec::new(); n];
        for (i, j) in arcs {
            assert!(i < n && j < n, "arc ({i}, {j}) out of range for {n} nodes");
            if i != j {
                rows[i].push(j);
            }
        }
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        Self { labels, rows }
    }

    pub fn unlabeled<I>(n: usize, arcs: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::from_arcs((0..n).map(|i| i.to_string()).collect(), arcs)
    }

    pub fn from_simple(g: &SimpleGraph) -> Self {
        Self {
            labels: g.labels().to_vec(),
            rows: (0..g.num_nodes()).map(|i| g.neighbors(i).to_vec()).collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn influencers(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&j| (i, j)))
    }

    /// Undirected simple graph on the same nodes, used for centralities.
    pub fn symmetrized(&self) -> SimpleGraph {
        SimpleGraph::from_edges(self.labels.clone(), self.arcs())
    }

    pub fn is_strongly_connected(&self) -> bool {
        strongly_connected(&self.rows)
    }
}

fn reach_all(rows: &[Vec<usize>]) -> bool {
    let n = rows.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &rows[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}

fn strongly_connected(rows: &[Vec<usize>]) -> bool {
    let n = rows.len();
    if n <= 1 {
        return true;
    }
    let mut reverse = vec![Vec::new(); n];
    for (i, r) in rows.iter().enumerate() {
        for &j in r {
            reverse[j].push(i);
        }
    }
    reach_all(rows) && reach_all(&reverse)
}

/// Square matrix stored as sorted `(column, value)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.sort_by_key(|e| e.0);
                r
            })
            .collect();
        Self { rows }
    }

    pub fn from_dense(w: &[Vec<f64>]) -> Self {
        Self {
            rows: w
                .iter()
                .map(|r| r.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(j, &v)| (j, v)).collect())
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut out = vec![vec![0.0; n]; n];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                out[i][j] = v;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|e| e.1).sum()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()).collect()
    }

    /// `W X` for `X` with `dim` columns, row-major.
    pub fn mul_rows(&self, x: &[f64], dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (i, r) in self.rows.iter().enumerate() {
            let dst = &mut out[i * dim..(i + 1) * dim];
            for &(j, v) in r {
                for (d, s) in dst.iter_mut().zip(&x[j * dim..(j + 1) * dim]) {
                    *d += v * s;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &SparseMatrix) -> SparseMatrix {
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let mut merged: Vec<(usize, f64)> = a.iter().chain(b).copied().collect();
                merged.sort_by_key(|e| e.0);
                let mut out: Vec<(usize, f64)> = Vec::with_capacity(merged.len());
                for (j, v) in merged {
                    match out.last_mut() {
                        Some(last) if last.0 == j => last.1 += v,
                        _ => out.push((j, v)),
                    }
                }
                out
            })
            .collect();
        SparseMatrix { rows }
    }

    /// ‖self − other‖∞ (maximum absolute row sum of the difference).
    pub fn inf_norm_diff(&self, other: &SparseMatrix) -> f64 {
        let n = self.n();
        let mut best: f64 = 0.0;
        for i in 0..n {
            let mut cols: Vec<usize> = self.rows[i].iter().chain(&other.rows[i]).map(|e| e.0).collect();
            cols.sort_unstable();
            cols.dedup();
            let s: f64 = cols.iter().map(|&j| (self.get(i, j) - other.get(i, j)).abs()).sum();
            best = best.max(s);
        }
        best
    }

    fn pattern(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|e| e.1 > 0.0).map(|e| e.0).collect())
            .collect()
    }

    /// Weakly connected components of the positive pattern, each sorted, listed
    /// by smallest member.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut undirected = vec![Vec::new(); n];
        for (i, r) in self.pattern().iter().enumerate() {
            for &j in r {
                undirected[i].push(j);
                undirected[j].push(i);
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut k = 0;
            while k < members.len() {
                let v = members[k];
                k += 1;
                for &w in &undirected[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    fn submatrix(&self, nodes: &[usize]) -> SparseMatrix {
        let mut local = vec![usize::MAX; self.n()];
        for (k, &v) in nodes.iter().enumerate() {
            local[v] = k;
        }
        SparseMatrix {
            rows: nodes
                .iter()
                .map(|&v| {
                    self.rows[v]
                        .iter()
                        .filter(|e| local[e.0] != usize::MAX)
                        .map(|&(j, x)| (local[j], x))
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WeightReport {
    /// Rows whose influencers all had zero raw weight; spread uniformly.
    pub uniform_fallback: Vec<String>,
    /// Rows without influencers; `W_ii = 1`.
    pub identity_rows: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix {
    pub matrix: SparseMatrix,
    pub eta: f64,
    pub lambda: Lambda,
    pub report: WeightReport,
}

impl PropagationMatrix {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("eta {eta} outside (0, 1]")))
    }
}

/// Row-normalized raw influence `λ·(D̂_j, Ĉ_j, B̂_j)` over the influencers of
/// each row, with centralities divided by their maximum.
fn influence_rows(
    g: &InfluenceGraph,
    cent: &CentralityVector,
    lambda: Lambda,
    report: &mut WeightReport,
) -> Result<Vec<Vec<(usize, f64)>>> {
    if cent.len() != g.num_nodes() || cent.labels != g.labels() {
        return Err(Error::Config("centralities are not aligned with the graph".into()));
    }
    let norm = cent.max_scaled();
    let [l1, l2, l3] = lambda.0;
    let mut rows = Vec::with_capacity(g.num_nodes());
    for i in 0..g.num_nodes() {
        let infl = g.influencers(i);
        if infl.is_empty() {
            rows.push(Vec::new());
            continue;
        }
        let raw: Vec<f64> = infl
            .iter()
            .map(|&j| l1 * norm.degree[j] + l2 * norm.closeness[j] + l3 * norm.betweenness[j])
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            rows.push(infl.iter().zip(&raw).map(|(&j, &r)| (j, r / total)).collect());
        } else {
            report.uniform_fallback.push(g.labels()[i].clone());
            let u = 1.0 / infl.len() as f64;
            rows.push(infl.iter().map(|&j| (j, u)).collect());
        }
    }
    Ok(rows)
}

/// `W = (1−η)I + ηA`.
pub fn build_weights(
    g: &InfluenceGraph,
    cent: &CentralityVector,
    lambda: Lambda,
    eta: f64,
) -> Result<PropagationMatrix> {
    check_eta(eta)?;
    let mut report = WeightReport::default();
    let a = influence_rows(g, cent, lambda, &mut report)?;
    let rows = a
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            if row.is_empty() {
                report.identity_rows.push(g.labels()[i].clone());
                return vec![(i, 1.0)];
            }
            let mut r: Vec<(usize, f64)> = row.into_iter().map(|(j, v)| (j, eta * v)).collect();
            if eta < 1.0 {
                r.push((i, 1.0 - eta));
            }
            r
        })
        .collect();
    if !report.identity_rows.is_empty() {
        log::info!("{} node(s) without influencers keep their state", report.identity_rows.len());
    }
    if !report.uniform_fallback.is_empty() {
        log::warn!("{} row(s) had all-zero centrality weights; used uniform", report.uniform_fallback.len());
    }
    Ok(PropagationMatrix {
        matrix: SparseMatrix::from_rows(rows),
        eta,
        lambda,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreferenceState {
    pub t: usize,
    pub p: Vec<f64>,
}

/// `P(t+1) = W P(t)`.
pub fn step(state: &PreferenceState, w: &SparseMatrix) -> Result<PreferenceState> {
    if state.p.len() != w.n() {
        return Err(Error::Config(format!(
            "state has {} entries, matrix is {}×{}",
            state.p.len(),
            w.n(),
            w.n()
        )));
    }
    Ok(PreferenceState {
        t: state.t + 1,
        p: w.mul_vec(&state.p),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Primitivity {
    Primitive,
    NotPrimitive,
    Undetermined,
}

/// Boolean powers `W, W², …` up to the Wielandt bound `N² − 2N + 2`.
pub fn check_primitive_exact(w: &SparseMatrix) -> Primitivity {
    let n = w.n();
    if n == 1 {
        return if w.get(0, 0) > 0.0 {
            Primitivity::Primitive
        } else {
            Primitivity::NotPrimitive
        };
    }
    let pattern = w.pattern();
    let bound = n * n - 2 * n + 2;
    // power[i] holds the columns reachable from i in exactly k steps
    let mut power: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            let mut r = vec![false; n];
            for &j in &pattern[i] {
                r[j] = true;
            }
            r
        })
        .collect();
    for _k in 1..=bound {
        if power.iter().all(|r| r.iter().all(|&b| b)) {
            return Primitivity::Primitive;
        }
        let next: Vec<Vec<bool>> = power
            .iter()
            .map(|r| {
                let mut out = vec![false; n];
                for (m, _) in r.iter().enumerate().filter(|e| *e.1) {
                    for &j in &pattern[m] {
                        out[j] = true;
                    }
                }
                out
            })
            .collect();
        power = next;
    }
    Primitivity::NotPrimitive
}

/// Strongly connected with a positive diagonal ⇒ primitive; not strongly
/// connected ⇒ reducible, hence not primitive; otherwise undetermined.
pub fn check_primitive_structural(w: &SparseMatrix) -> Primitivity {
    let pattern = w.pattern();
    if !strongly_connected(&pattern) {
        return Primitivity::NotPrimitive;
    }
    if (0..w.n()).all(|i| w.get(i, i) > 0.0) {
        Primitivity::Primitive
    } else {
        Primitivity::Undetermined
    }
}

pub fn check_primitive(w: &SparseMatrix) -> Primitivity {
    if w.n() <= EXACT_PRIMITIVE_CAP {
        check_primitive_exact(w)
    } else {
        check_primitive_structural(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentEquilibrium {
    pub nodes: Vec<usize>,
    /// Left Perron vector restricted to `nodes`, summing to 1.
    pub pi: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub components: Vec<ComponentEquilibrium>,
    /// `W·1 = 1` holds, so the right Perron direction is constant.
    pub right_vector_is_ones: bool,
}

impl Equilibrium {
    /// Per component, `π_cᵀ P(0)|_c`.
    pub fn consensus(&self, p0: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.nodes.iter().zip(&c.pi).map(|(&v, &p)| p * p0[v]).sum())
            .collect()
    }

    /// Node-level prediction: every node takes its component's consensus.
    pub fn predicted_state(&self, p0: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p0.len()];
        for (c, value) in self.components.iter().zip(self.consensus(p0)) {
            for &v in &c.nodes {
                out[v] = value;
            }
        }
        out
    }

    /// π over all nodes, each component normalized separately.
    pub fn pi(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for c in &self.components {
            for (&v, &p) in c.nodes.iter().zip(&c.pi) {
                out[v] = p;
            }
        }
        out
    }
}

fn power_iteration(w: &SparseMatrix) -> Result<(Vec<f64>, usize)> {
    let n = w.n();
    let mut pi = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for it in 1..=EQUILIBRIUM_MAX_ITER {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for &(j, v) in w.row(i) {
                next[j] += pi[i] * v;
            }
        }
        let mass: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= mass);
        residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if residual < EQUILIBRIUM_TOL {
            return Ok((pi, it));
        }
    }
    Err(Error::NotConverged {
        iterations: EQUILIBRIUM_MAX_ITER,
        residual,
    })
}

/// Stationary distribution per weakly connected component by power iteration
/// on `Wᵀ`.
pub fn equilibrium(w: &SparseMatrix) -> Result<Equilibrium> {
    let components = w
        .weak_components()
        .into_iter()
        .map(|nodes| {
            let (pi, iterations) = power_iteration(&w.submatrix(&nodes))?;
            Ok(ComponentEquilibrium { nodes, pi, iterations })
        })
        .collect::<Result<Vec<_>>>()?;
    let right_vector_is_ones = w.row_sums().iter().all(|s| (s - 1.0).abs() <= ROW_SUM_TOL);
    Ok(Equilibrium {
        components,
        right_vector_is_ones,
    })
}

/// Piecewise-constant weight schedule: `(first step, matrix)` pairs with the
/// first starting at step 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pieces: Vec<(usize, SparseMatrix)>,
}

impl Schedule {
    pub fn constant(w: SparseMatrix) -> Self {
        Self { pieces: vec![(0, w)] }
    }

    pub fn new(pieces: Vec<(usize, SparseMatrix)>) -> Result<Self> {
        if pieces.first().map(|p| p.0) != Some(0) {
            return Err(Error::Config("schedule must start at step 0".into()));
        }
        if !pieces.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::Config("schedule steps must increase".into()));
        }
        let n = pieces[0].1.n();
        if pieces.iter().any(|p| p.1.n() != n) {
            return Err(Error::Config("schedule matrices differ in size".into()));
        }
        for (t, m) in &pieces {
            if let Some((i, s)) = m.row_sums().iter().enumerate().find(|(_, s)| (*s - 1.0).abs() > ROW_SUM_TOL) {
                return Err(Error::Config(format!("matrix from step {t} has row {i} summing to {s}")));
            }
        }
        Ok(Self { pieces })
    }

    pub fn n(&self) -> usize {
        self.pieces[0].1.n()
    }

    fn at(&self, t: usize) -> &SparseMatrix {
        let k = self.pieces.partition_point(|p| p.0 <= t) - 1;
        &self.pieces[k].1
    }

    fn last_switch(&self) -> usize {
        self.pieces.last().expect("nonempty").0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationOptions {
    pub t_max: usize,
    pub tol: f64,
    /// Largest allowed ‖W(t) − W(t−1)‖∞ before a smoothness warning.
    pub smoothness_bound: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_T_MAX,
            tol: DEFAULT_TOL,
            smoothness_bound: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: usize,
    /// Largest max-minus-min spread within any component.
    pub spread: f64,
    pub consensus_estimate: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub layer_spreads: Vec<f64>,
    /// Spread of the layer means.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inter_layer_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentVerdict {
    pub nodes: Vec<String>,
    pub predicted: f64,
    pub achieved: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcseOutcome {
    pub steps: usize,
    pub converged: bool,
    pub primitivity: Primitivity,
    pub components: Vec<ComponentVerdict>,
    pub pi: Vec<f64>,
    pub smoothness_violations: Vec<usize>,
    pub final_state: Vec<f64>,
    #[serde(skip)]
    pub trajectory: Vec<TrajectoryRow>,
}

impl DcseOutcome {
    pub fn max_error(&self) -> f64 {
        self.components.iter().map(|c| c.error).fold(0.0, f64::max)
    }

    pub fn write_trajectory_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let layers = self.trajectory.first().map_or(0, |r| r.layer_spreads.len());
        write!(out, "t,spread,consensus_estimate")?;
        if self.trajectory.first().is_some_and(|r| r.inter_layer_spread.is_some()) {
            write!(out, ",inter_layer_spread")?;
        }
        for l in 0..layers {
            write!(out, ",layer{l}_spread")?;
        }
        writeln!(out)?;
        for r in &self.trajectory {
            write!(out, "{},{:e},{}", r.t, r.spread, r.consensus_estimate)?;
            if let Some(x) = r.inter_layer_spread {
                write!(out, ",{x:e}")?;
            }
            for s in &r.layer_spreads {
                write!(out, ",{s:e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn spread_of(p: &[f64], nodes: &[usize]) -> f64 {
    let (lo, hi) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(p[v]), hi.max(p[v]))
    });
    hi - lo
}

/// Iterates the schedule until every component of the final matrix has
/// spread below `tol`, or `t_max` steps. The prediction is `π_lastᵀ P(s)`
/// with `s` the last switch step and `π_last` the final matrix's equilibrium.
pub fn simulate(
    schedule: &Schedule,
    labels: &[String],
    p0: &[f64],
    opts: SimulationOptions,
    layers: Option<&[Vec<usize>]>,
) -> Result<DcseOutcome> {
    let n = schedule.n();
    if p0.len() != n || labels.len() != n {
        return Err(Error::Config(format!("initial state has {} entries for {n} nodes", p0.len())));
    }
    if let Some(v) = p0.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numeric {
            node: labels[v].clone(),
            message: "initial preference is not finite".into(),
        });
    }
    let last = schedule.at(schedule.last_switch());
    let eq = equilibrium(last)?;
    let primitivity = check_primitive(last);
    let comps: Vec<Vec<usize>> = eq.components.iter().map(|c| c.nodes.clone()).collect();

    let record = |t: usize, p: &[f64]| TrajectoryRow {
        t,
        spread: comps.iter().map(|c| spread_of(p, c)).fold(0.0, f64::max),
        consensus_estimate: p.iter().sum::<f64>() / n as f64,
        layer_spreads: layers.map_or_else(Vec::new, |ls| ls.iter().map(|l| spread_of(p, l)).collect()),
        inter_layer_spread: layers.map(|ls| {
            let means: Vec<f64> = ls
                .iter()
                .map(|l| l.iter().map(|&v| p[v]).sum::<f64>() / l.len() as f64)
                .collect();
            let all: Vec<usize> = (0..means.len()).collect();
            spread_of(&means, &all)
        }),
    };

    let mut p = p0.to_vec();
    let mut at_switch = p.clone();
    let mut trajectory = vec![record(0, &p)];
    let mut violations = Vec::new();
    let mut t = 0;
    let mut converged = false;
    while t < opts.t_max {
        if t > 0 {
            let (prev, cur) = (schedule.at(t - 1), schedule.at(t));
            if !std::ptr::eq(prev, cur) && prev.inf_norm_diff(cur) > opts.smoothness_bound {
                log::warn!("weight change at step {t} exceeds the smoothness bound");
                violations.push(t);
            }
        }
        if t == schedule.last_switch() {
            at_switch.clone_from(&p);
        }
        p = schedule.at(t).mul_vec(&p);
        t += 1;
        if let Some(v) = p.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric {
                node: labels[v].clone(),
                message: format!("state became non-finite at step {t}"),
            });
        }
        let row = record(t, &p);
        let done = row.spread < opts.tol && t > schedule.last_switch();
        trajectory.push(row);
        if done {
            converged = true;
            break;
        }
    }
    if t <= schedule.last_switch() {
        at_switch.clone_from(&p);
    }
    if !converged && primitivity == Primitivity::Primitive {
        log::warn!("no consensus after {t} steps on a primitive matrix");
    }

    let predicted = eq.consensus(&at_switch);
    let components = eq
        .components
        .iter()
        .zip(predicted)
        .map(|(c, predicted)| {
            let achieved = c.nodes.iter().map(|&v| p[v]).sum::<f64>() / c.nodes.len() as f64;
            ComponentVerdict {
                nodes: c.nodes.iter().map(|&v| labels[v].clone()).collect(),
                predicted,
                achieved,
                error: (achieved - predicted).abs(),
            }
        })
        .collect();
    Ok(DcseOutcome {
        steps: t,
        converged,
        primitivity,
        components,
        pi: eq.pi(n),
        smoothness_violations: violations,
        final_state: p,
        trajectory,
    })
}

/// Builds `W` from the graph and runs [`simulate`] with a constant schedule.
pub fn simulate_dcse(
    g: &InfluenceGraph,
    cent: &CentralityVector,
    lambda: Lambda,
    eta: f64,
    p0: &[f64],
    opts: SimulationOptions,
) -> Result<DcseOutcome> {
    let w = build_weights(g, cent, lambda, eta)?;
    simulate(&Schedule::constant(w.matrix), g.labels(), p0, opts, None)
}

/// Nodes split into layers with horizontal (within-layer) and vertical
/// (cross-layer) influence arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredGraph {
    labels: Vec<String>,
    layer_of: Vec<usize>,
    layers: Vec<Vec<usize>>,
    horizontal: InfluenceGraph,
    vertical: InfluenceGraph,
    pub rho_v: f64,
}

impl LayeredGraph {
    pub fn new(
        labels: Vec<String>,
        layer_of: Vec<usize>,
        horizontal: Vec<(usize, usize)>,
        vertical: Vec<(usize, usize)>,
        rho_v: f64,
    ) -> Result<Self> {
        let n = labels.len();
        if layer_of.len() != n {
            return Err(Error::Config("every node needs a layer".into()));
        }
        if !(0.0..1.0).contains(&rho_v) {
            return Err(Error::Config(format!("rho_v {rho_v} outside [0, 1)")));
        }
        let k = layer_of.iter().max().map_or(0, |m| m + 1);
        let mut layers = vec![Vec::new(); k];
        for (v, &l) in layer_of.iter().enumerate() {
            layers[l].push(v);
        }
        if let Some(empty) = layers.iter().position(Vec::is_empty) {
            return Err(Error::Config(format!("layer {empty} is empty")));
        }
        for &(a, b) in &horizontal {
            if a >= n || b >= n || layer_of[a] != layer_of[b] {
                return Err(Error::Config(format!("horizontal arc ({a}, {b}) crosses layers")));
            }
        }
        for &(a, b) in &vertical {
            if a >= n || b >= n || layer_of[a] == layer_of[b] {
                return Err(Error::Config(format!("vertical arc ({a}, {b}) stays within a layer")));
            }
        }
        Ok(Self {
            horizontal: InfluenceGraph::from_arcs(labels.clone(), horizontal),
            vertical: InfluenceGraph::from_arcs(labels.clone(), vertical),
            labels,
            layer_of,
            layers,
            rho_v,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn layer_of(&self, v: usize) -> usize {
        self.layer_of[v]
    }

    pub fn horizontal(&self) -> &InfluenceGraph {
        &self.horizontal
    }

    pub fn vertical(&self) -> &InfluenceGraph {
        &self.vertical
    }

    /// Undirected union of both arc sets, for centralities.
    pub fn symmetrized(&self) -> SimpleGraph {
        SimpleGraph::from_edges(
            self.labels.clone(),
            self.horizontal.arcs().chain(self.vertical.arcs()),
        )
    }

    /// Layers whose horizontal subgraph is not strongly connected.
    pub fn weak_layers(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&l| {
                let nodes = &self.layers[l];
                let local: std::collections::HashMap<usize, usize> =
                    nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
                let rows: Vec<Vec<usize>> = nodes
                    .iter()
                    .map(|&v| self.horizontal.influencers(v).iter().map(|j| local[j]).collect())
                    .collect();
                !strongly_connected(&rows)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchical {
    pub w_h: SparseMatrix,
    pub w_v: SparseMatrix,
    pub w_c: SparseMatrix,
    pub report: WeightReport,
}

/// `W_H = (1−η)I + η(1−ρ_v)A_H`, `W_V = ηρ_v A_V` with uniform vertical
/// weights. A row without vertical influencers keeps the full η horizontally;
/// one without horizontal influencers gives the full η to the vertical side.
pub fn build_hierarchical(
    lg: &LayeredGraph,
    cent: &CentralityVector,
    lambda: Lambda,
    eta: f64,
) -> Result<Hierarchical> {
    check_eta(eta)?;
    let mut report = WeightReport::default();
    let a_h = influence_rows(&lg.horizontal, cent, lambda, &mut report)?;
    let n = lg.labels.len();
    let mut h_rows = Vec::with_capacity(n);
    let mut v_rows = Vec::with_capacity(n);
    for (i, ah) in a_h.into_iter().enumerate() {
        let vert = lg.vertical.influencers(i);
        let (share_h, share_v) = match (ah.is_empty(), vert.is_empty()) {
            (false, false) => (eta * (1.0 - lg.rho_v), eta * lg.rho_v),
            (false, true) => (eta, 0.0),
            (true, false) => (0.0, eta),
            (true, true) => (0.0, 0.0),
        };
        let mut hr: Vec<(usize, f64)> = ah.into_iter().map(|(j, v)| (j, share_h * v)).collect();
        let self_weight = if share_h + share_v == 0.0 {
            report.identity_rows.push(lg.labels[i].clone());
            1.0
        } else {
            1.0 - eta
        };
        if self_weight > 0.0 {
            hr.push((i, self_weight));
        }
        h_rows.push(hr);
        let vr: Vec<(usize, f64)> = if share_v > 0.0 {
            let b = share_v / vert.len() as f64;
            vert.iter().map(|&j| (j, b)).collect()
        } else {
            Vec::new()
        };
        v_rows.push(vr);
    }
    let w_h = SparseMatrix::from_rows(h_rows);
    let w_v = SparseMatrix::from_rows(v_rows);
    let w_c = w_h.add(&w_v);
    Ok(Hierarchical { w_h, w_v, w_c, report })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CehsOutcome {
    pub dynamics: DcseOutcome,
    pub weak_layers: Vec<usize>,
    /// Max over layers of the within-layer spread, per recorded step.
    pub intra_spread: Vec<f64>,
    /// Spread of the layer means, per recorded step.
    pub inter_spread: Vec<f64>,
    pub first_intra_below_tol: Option<usize>,
    pub first_inter_below_tol: Option<usize>,
}

pub fn simulate_cehs(
    lg: &LayeredGraph,
    cent: &CentralityVector,
    lambda: Lambda,
    eta: f64,
    p0: &[f64],
    opts: SimulationOptions,
) -> Result<CehsOutcome> {
    let weak_layers = lg.weak_layers();
    if !weak_layers.is_empty() {
        log::warn!("layers {weak_layers:?} are not strongly connected horizontally");
    }
    let h = build_hierarchical(lg, cent, lambda, eta)?;
    let dynamics = simulate(&Schedule::constant(h.w_c), &lg.labels, p0, opts, Some(&lg.layers))?;
    let intra: Vec<f64> = dynamics
        .trajectory
        .iter()
        .map(|r| r.layer_spreads.iter().copied().fold(0.0, f64::max))
        .collect();
    let inter: Vec<f64> = dynamics
        .trajectory
        .iter()
        .map(|r| r.inter_layer_spread.unwrap_or(0.0))
        .collect();
    let first_below = |xs: &[f64]| xs.iter().position(|&x| x < opts.tol);
    Ok(CehsOutcome {
        first_intra_below_tol: first_below(&intra),
        first_inter_below_tol: first_below(&inter),
        dynamics,
        weak_layers,
        intra_spread: intra,
        inter_spread: inter,
    })
}

/// `a_i ← a_i + α Σ_j w_ij (a_j − a_i)`, with `weights[i]` aligned with
/// `g.influencers(i)`.
pub fn attitude_step(a: &[f64], g: &InfluenceGraph, weights: &[Vec<f64>], alpha: f64) -> Result<Vec<f64>> {
    validate_attitude(a, g, weights, alpha)?;
    Ok((0..a.len())
        .map(|i| {
            let pull: f64 = g
                .influencers(i)
                .iter()
                .zip(&weights[i])
                .map(|(&j, &w)| w * (a[j] - a[i]))
                .sum();
            a[i] + alpha * pull
        })
        .collect())
}

/// The equivalent matrix `I − α L_w`.
pub fn attitude_matrix(g: &InfluenceGraph, weights: &[Vec<f64>], alpha: f64) -> SparseMatrix {
    let rows = (0..g.num_nodes())
        .map(|i| {
            let mut r: Vec<(usize, f64)> = g
                .influencers(i)
                .iter()
                .zip(&weights[i])
                .map(|(&j, &w)| (j, alpha * w))
                .collect();
            let out: f64 = weights[i].iter().sum();
            r.push((i, 1.0 - alpha * out));
            r
        })
        .collect();
    SparseMatrix::from_rows(rows)
}

fn validate_attitude(a: &[f64], g: &InfluenceGraph, weights: &[Vec<f64>], alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("alpha {alpha} outside (0, 1]")));
    }
    if a.len() != g.num_nodes() || weights.len() != g.num_nodes() {
        return Err(Error::Config("attitudes and weights must cover every node".into()));
    }
    for i in 0..g.num_nodes() {
        if weights[i].len() != g.influencers(i).len() {
            return Err(Error::Config(format!("row {i} weights do not match its influencers")));
        }
        let s: f64 = weights[i].iter().sum();
        if weights[i].iter().any(|&w| w < 0.0) || s > 1.0 + ROW_SUM_TOL {
            return Err(Error::Config(format!("row {i} weights must be nonnegative and sum to at most 1")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cent_of(g: &InfluenceGraph) -> CentralityVector {
        CentralityVector::compute(&g.symmetrized())
    }

    #[test]
    fn two_node_weights() {
        let g = InfluenceGraph::unlabeled(2, [(0, 1), (1, 0)]);
        for lambda in [Lambda::default(), Lambda([0.9, 0.1, 0.0])] {
            let w = build_weights(&g, &cent_of(&g), lambda, 0.5).unwrap();
            assert_eq!(w.matrix.to_dense(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        }
    }

    #[test]
    fn rows_sum_to_one_and_diagonal_is_one_minus_eta() {
        let g = InfluenceGraph::unlabeled(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 2)]);
        let w = build_weights(&g, &cent_of(&g), Lambda([0.2, 0.5, 0.3]), 0.3).unwrap();
        for (i, s) in w.matrix.row_sums().iter().enumerate() {
            assert!((s - 1.0).abs() <= 1e-12);
            assert!((w.matrix.get(i, i) - 0.7).abs() <= 1e-15);
        }
        assert_eq!(w.matrix.get(0, 2), 0.0);
    }

    #[test]
    fn zero_weights_fall_back_to_uniform() {
        // betweenness-only mixing on a path: the leaves have zero betweenness
        let g = InfluenceGraph::unlabeled(3, [(1, 0), (1, 2), (0, 1), (2, 1)]);
        let w = build_weights(&g, &cent_of(&g), Lambda([0.0, 0.0, 1.0]), 0.5).unwrap();
        assert_eq!(w.report.uniform_fallback, vec!["1".to_string()]);
        assert_eq!(w.matrix.get(1, 0), 0.25);
    }

    #[test]
    fn isolated_node_gets_identity_row() {
        let g = InfluenceGraph::unlabeled(3, [(0, 1), (1, 0)]);
        let w = build_weights(&g, &cent_of(&g), Lambda::default(), 0.5).unwrap();
        assert_eq!(w.report.identity_rows, vec!["2".to_string()]);
        assert_eq!(w.matrix.row(2), &[(2, 1.0)]);
    }

    #[test]
    fn step_examples() {
        let w = SparseMatrix::from_dense(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let s = step(&PreferenceState { t: 0, p: vec![1.0, 0.0] }, &w).unwrap();
        assert_eq!((s.t, s.p), (1, vec![0.5, 0.5]));
        let u = step(&PreferenceState { t: 3, p: vec![0.2, 0.2] }, &w).unwrap();
        assert_eq!(u.p, vec![0.2, 0.2]);
    }

    #[test]
    fn primitivity_cases() {
        let cycle = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(check_primitive(&cycle), Primitivity::NotPrimitive);
        assert_eq!(check_primitive_structural(&cycle), Primitivity::Undetermined);
        let lazy = SparseMatrix::from_dense(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(check_primitive(&lazy), Primitivity::Primitive);
        let identity = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(check_primitive_exact(&identity), Primitivity::NotPrimitive);
        assert_eq!(check_primitive_structural(&identity), Primitivity::NotPrimitive);
    }

    #[test]
    fn equilibrium_examples() {
        let sym = SparseMatrix::from_dense(&[vec![0.6, 0.4, 0.0], vec![0.4, 0.2, 0.4], vec![0.0, 0.4, 0.6]]);
        for p in equilibrium(&sym).unwrap().pi(3) {
            assert!((p - 1.0 / 3.0).abs() < 1e-11);
        }
        let w = SparseMatrix::from_dense(&[vec![0.9, 0.1], vec![0.5, 0.5]]);
        let pi = equilibrium(&w).unwrap().pi(2);
        assert!((pi[0] - 5.0 / 6.0).abs() < 1e-11);
        assert!((pi[1] - 1.0 / 6.0).abs() < 1e-11);
    }

    #[test]
    fn disconnected_blocks_are_uniform_per_block() {
        let w = SparseMatrix::from_dense(&[
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 0.7, 0.3],
            vec![0.0, 0.0, 0.3, 0.7],
        ]);
        let eq = equilibrium(&w).unwrap();
        assert_eq!(eq.components.len(), 2);
        for p in eq.pi(4) {
            assert!((p - 0.5).abs() < 1e-11);
        }
        assert_eq!(eq.consensus(&[1.0, 0.0, 4.0, 2.0]), vec![0.5, 3.0]);
    }

    #[test]
    fn two_node_consensus_in_one_step() {
        let g = InfluenceGraph::unlabeled(2, [(0, 1), (1, 0)]);
        let out = simulate_dcse(&g, &cent_of(&g), Lambda::default(), 0.5, &[1.0, 0.0], SimulationOptions::default()).unwrap();
        assert_eq!(out.steps, 1);
        assert!(out.converged);
        assert_eq!(out.final_state, vec![0.5, 0.5]);
        assert_eq!(out.components[0].predicted, 0.5);
    }

    #[test]
    fn two_components_keep_two_values() {
        let g = InfluenceGraph::unlabeled(4, [(0, 1), (1, 0), (2, 3), (3, 2)]);
        let out = simulate_dcse(&g, &cent_of(&g), Lambda::default(), 0.5, &[1.0, 0.0, 5.0, 3.0], SimulationOptions::default()).unwrap();
        assert!(out.converged);
        let values: Vec<f64> = out.components.iter().map(|c| c.achieved).collect();
        assert_eq!(values, vec![0.5, 4.0]);
    }

    #[test]
    fn schedule_predicts_from_last_switch() {
        let a = SparseMatrix::from_dense(&[vec![0.9, 0.1], vec![0.5, 0.5]]);
        let b = SparseMatrix::from_dense(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let s = Schedule::new(vec![(0, a), (3, b)]).unwrap();
        let labels = vec!["0".to_string(), "1".to_string()];
        let out = simulate(&s, &labels, &[1.0, 0.0], SimulationOptions::default(), None).unwrap();
        assert!(out.converged);
        assert!(out.max_error() < 1e-12);
        assert_eq!(out.smoothness_violations, vec![3]);
    }

    #[test]
    fn hierarchical_rho_zero_is_block_diagonal() {
        let lg = LayeredGraph::new(
            (0..4).map(|i| i.to_string()).collect(),
            vec![0, 0, 1, 1],
            vec![(0, 1), (1, 0), (2, 3), (3, 2)],
            vec![(0, 2), (2, 0)],
            0.0,
        )
        .unwrap();
        let cent = CentralityVector::compute(&lg.symmetrized());
        let h = build_hierarchical(&lg, &cent, Lambda::default(), 0.5).unwrap();
        assert_eq!(h.w_c.get(0, 2), 0.0);
        for s in h.w_c.row_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_full_coupling_has_uniform_equilibrium() {
        // layers {0,1}, {2,3}; every node sees its layer mate and both nodes of
        // the other layer
        let lg = LayeredGraph::new(
            (0..4).map(|i| i.to_string()).collect(),
            vec![0, 0, 1, 1],
            vec![(0, 1), (1, 0), (2, 3), (3, 2)],
            vec![(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)],
            0.4,
        )
        .unwrap();
        let cent = CentralityVector::compute(&lg.symmetrized());
        let h = build_hierarchical(&lg, &cent, Lambda::default(), 0.5).unwrap();
        // row 0: self 0.5, mate 0.5·0.6 = 0.3, each vertical 0.5·0.4/2 = 0.1
        let expected = vec![0.5, 0.3, 0.1, 0.1];
        for (a, b) in h.w_c.to_dense()[0].iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
        for p in equilibrium(&h.w_c).unwrap().pi(4) {
            assert!((p - 0.25).abs() < 1e-11);
        }
    }

    #[test]
    fn layered_graph_validation() {
        let labels: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        assert!(LayeredGraph::new(labels.clone(), vec![0, 0, 2], vec![], vec![], 0.2).is_err());
        assert!(LayeredGraph::new(labels.clone(), vec![0, 0, 1], vec![(0, 2)], vec![], 0.2).is_err());
        assert!(LayeredGraph::new(labels.clone(), vec![0, 0, 1], vec![], vec![(0, 1)], 0.2).is_err());
        assert!(LayeredGraph::new(labels, vec![0, 0, 1], vec![], vec![], 1.0).is_err());
    }

    #[test]
    fn attitude_examples() {
        let g = InfluenceGraph::unlabeled(2, [(0, 1), (1, 0)]);
        let w = vec![vec![1.0], vec![1.0]];
        assert_eq!(attitude_step(&[0.0, 1.0], &g, &w, 0.5).unwrap(), vec![0.5, 0.5]);
        assert_eq!(attitude_step(&[0.3, 0.3], &g, &w, 0.5).unwrap(), vec![0.3, 0.3]);
        assert!(attitude_step(&[0.0, 1.0], &g, &[vec![1.5], vec![1.0]], 0.5).is_err());
    }

    #[test]
    fn lambda_grid_has_64_cells() {
        let g = Lambda::grid();
        assert_eq!(g.len(), 64);
        assert_eq!(g[0].0, [0.1, 0.1, 0.1]);
        assert_eq!(g[63].0, [0.9, 0.9, 0.9]);
    }
}
