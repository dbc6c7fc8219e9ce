#![allow(dead_code)]

use cyberswarm::dynamics::{InfluenceGraph, LayeredGraph};
use cyberswarm::model::SimpleGraph;
use cyberswarm::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn erdos_renyi(r: &mut ChaCha8Rng, n: usize, p: f64) -> SimpleGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if r.gen::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    SimpleGraph::unlabeled(n, edges)
}

/// Random Hamiltonian cycle plus extra arcs with probability `p`.
pub fn strongly_connected_arcs(r: &mut ChaCha8Rng, nodes: &[usize], p: f64) -> Vec<(usize, usize)> {
    let mut order = nodes.to_vec();
    order.shuffle(r);
    let k = order.len();
    let mut arcs = Vec::new();
    if k >= 2 {
        for i in 0..k {
            arcs.push((order[i], order[(i + 1) % k]));
        }
    }
    for &a in nodes {
        for &b in nodes {
            if a != b && r.gen::<f64>() < p {
                arcs.push((a, b));
            }
        }
    }
    arcs
}

pub fn strongly_connected_digraph(seed: u64, n: usize, p: f64) -> InfluenceGraph {
    let mut r = rng::seeded(seed);
    let nodes: Vec<usize> = (0..n).collect();
    InfluenceGraph::unlabeled(n, strongly_connected_arcs(&mut r, &nodes, p))
}

/// Disjoint strongly connected blocks of the given sizes.
pub fn disconnected_digraph(seed: u64, sizes: &[usize], p: f64) -> (InfluenceGraph, Vec<Vec<usize>>) {
    let mut r = rng::seeded(seed);
    let mut arcs = Vec::new();
    let mut blocks = Vec::new();
    let mut next = 0;
    for &s in sizes {
        let nodes: Vec<usize> = (next..next + s).collect();
        arcs.extend(strongly_connected_arcs(&mut r, &nodes, p));
        blocks.push(nodes);
        next += s;
    }
    (InfluenceGraph::unlabeled(next, arcs), blocks)
}

/// Layers of the given sizes, each strongly connected horizontally. With
/// `vertical`, every consecutive pair of layers is joined by arcs both ways.
pub fn layered(seed: u64, sizes: &[usize], vertical: bool, rho_v: f64) -> LayeredGraph {
    let mut r = rng::seeded(seed);
    let mut layer_of = Vec::new();
    let mut horizontal = Vec::new();
    let mut layers = Vec::new();
    for (l, &s) in sizes.iter().enumerate() {
        let nodes: Vec<usize> = (layer_of.len()..layer_of.len() + s).collect();
        layer_of.extend(std::iter::repeat(l).take(s));
        horizontal.extend(strongly_connected_arcs(&mut r, &nodes, 0.3));
        layers.push(nodes);
    }
    let mut vert = Vec::new();
    if vertical {
        for w in layers.windows(2) {
            let (a, b) = (*w[0].choose(&mut r).unwrap(), *w[1].choose(&mut r).unwrap());
            vert.push((a, b));
            vert.push((b, a));
            for &x in &w[0] {
                for &y in &w[1] {
                    if r.gen::<f64>() < 0.2 {
                        vert.push((x, y));
                        vert.push((y, x));
                    }
                }
            }
        }
    }
    let n = layer_of.len();
    LayeredGraph::new((0..n).map(|i| i.to_string()).collect(), layer_of, horizontal, vert, rho_v).unwrap()
}

pub fn random_state(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng::seeded(seed ^ 0x5eed);
    (0..n).map(|_| r.gen::<f64>()).collect()
}

pub struct RankingInstance {
    pub rankings: Vec<Vec<usize>>,
    pub relevant: Vec<Vec<usize>>,
    pub ks: Vec<usize>,
}

/// Users with deduplicated rankings over a small catalogue, some with empty
/// relevant sets.
pub fn ranking_instance(seed: u64) -> RankingInstance {
    let mut r = rng::seeded(seed ^ 0x7a4c);
    let items = r.gen_range(5..60);
    let users = r.gen_range(1..12);
    let mut rankings = Vec::new();
    let mut relevant = Vec::new();
    for _ in 0..users {
        let mut all: Vec<usize> = (0..items).collect();
        all.shuffle(&mut r);
        all.truncate(r.gen_range(1..=items));
        rankings.push(all);
        let rel: Vec<usize> = (0..items).filter(|_| r.gen::<f64>() < 0.15).collect();
        relevant.push(rel);
    }
    let mut ks: Vec<usize> = (0..r.gen_range(1..5)).map(|_| r.gen_range(1..=items + 3)).collect();
    ks.sort_unstable();
    ks.dedup();
    RankingInstance { rankings, relevant, ks }
}
