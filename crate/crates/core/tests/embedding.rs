use cyberswarm::centrality::CentralityVector;
use cyberswarm::embedding::{
    concat_features, generate_walks, train_skipgram, ConcatWeights, SkipGramConfig, WalkConfig,
};
use cyberswarm::model::SimpleGraph;
use proptest::prelude::*;

fn chi_square(observed: &[usize], probs: &[f64]) -> f64 {
    let total: usize = observed.iter().sum();
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

#[test]
fn uniform_walk_from_star_center_is_uniform() {
    let leaves = 4;
    let g = SimpleGraph::unlabeled(leaves + 1, (1..=leaves).map(|i| (0, i)));
    let cfg = WalkConfig { length: 41, per_node: 1000, p: 1.0, q: 1.0 };
    let corpus = generate_walks(&g, cfg, 2024).unwrap();
    let mut counts = vec![0usize; leaves];
    let mut steps = 0;
    for w in &corpus.walks {
        for pair in w.windows(2) {
            if pair[0] == 0 {
                counts[pair[1] - 1] += 1;
                steps += 1;
            }
        }
    }
    assert!(steps >= 100_000, "only {steps} steps from the center");
    // 3 degrees of freedom, 99% quantile
    let stat = chi_square(&counts, &vec![0.25; leaves]);
    assert!(stat < 11.345, "chi-square {stat} for {counts:?}");
}

#[test]
fn second_order_bias_matches_transition_weights() {
    // from (prev 0, cur 1): back to 0 has weight 1/p, to common neighbour 2
    // weight 1, to 3 (two hops from 0) weight 1/q
    let g = SimpleGraph::unlabeled(4, [(0, 1), (0, 2), (1, 2), (1, 3)]);
    let (p, q) = (0.5, 2.0);
    let cfg = WalkConfig { length: 60, per_node: 400, p, q };
    let corpus = generate_walks(&g, cfg, 77).unwrap();
    let mut counts = [0usize; 3];
    for w in &corpus.walks {
        for t in w.windows(3) {
            if t[0] == 0 && t[1] == 1 {
                counts[match t[2] {
                    0 => 0,
                    2 => 1,
                    3 => 2,
                    other => panic!("impossible step to {other}"),
                }] += 1;
            }
        }
    }
    let weights = [1.0 / p, 1.0, 1.0 / q];
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    assert!(counts.iter().sum::<usize>() > 5000);
    let stat = chi_square(&counts, &probs);
    assert!(stat < 9.21, "chi-square {stat} for {counts:?}");
}

#[test]
fn walks_are_identical_across_thread_counts() {
    let g = SimpleGraph::unlabeled(30, (0..30).flat_map(|i| [(i, (i + 1) % 30), (i, (i + 7) % 30)]));
    let cfg = WalkConfig { p: 0.7, q: 1.3, ..Default::default() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| generate_walks(&g, cfg, 4).unwrap());
    assert_eq!(serial, generate_walks(&g, cfg, 4).unwrap());
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn barbell_cliques_embed_apart() {
    let mut edges = Vec::new();
    for base in [0, 5] {
        for a in 0..5 {
            for b in (a + 1)..5 {
                edges.push((base + a, base + b));
            }
        }
    }
    edges.push((4, 5));
    let g = SimpleGraph::unlabeled(10, edges);
    let corpus = generate_walks(&g, WalkConfig::default(), 1).unwrap();
    let cfg = SkipGramConfig { dim: 16, ..Default::default() };
    let emb = train_skipgram(&corpus, cfg, 1).unwrap().vectors;
    let (mut intra, mut inter) = (Vec::new(), Vec::new());
    for a in 0..10 {
        for b in (a + 1)..10 {
            let c = cosine(emb.row(a), emb.row(b));
            if (a < 5) == (b < 5) {
                intra.push(c);
            } else {
                inter.push(c);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&intra) > mean(&inter), "intra {} inter {}", mean(&intra), mean(&inter));
}

#[test]
fn training_stays_finite_on_a_large_corpus() {
    let n = 2000;
    let g = SimpleGraph::unlabeled(n, (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i * 31 + 7) % n)]));
    let corpus = generate_walks(&g, WalkConfig { length: 50, per_node: 10, p: 1.0, q: 1.0 }, 3).unwrap();
    assert_eq!(corpus.num_tokens(), 1_000_000);
    let cfg = SkipGramConfig { dim: 8, epochs: 1, learning_rate: 0.05, ..Default::default() };
    let t = train_skipgram(&corpus, cfg, 3).unwrap();
    assert!(t.vectors.as_slice().iter().all(|v| v.is_finite()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn every_step_is_an_edge(n in 2usize..15, raw in proptest::collection::vec((0usize..15, 0usize..15), 1..40),
                             p in 0.25f64..4.0, q in 0.25f64..4.0, seed in any::<u64>()) {
        let g = SimpleGraph::unlabeled(n, raw.into_iter().map(|(a, b)| (a % n, b % n)));
        let cfg = WalkConfig { length: 12, per_node: 2, p, q };
        let corpus = generate_walks(&g, cfg, seed).unwrap();
        for w in &corpus.walks {
            prop_assert!(w.len() <= 12);
            prop_assert!(g.degree(w[0]) > 0);
            prop_assert!(w.windows(2).all(|s| g.has_edge(s[0], s[1])));
        }
    }

    #[test]
    fn concat_is_linear_in_the_centrality_weight(w in 0.0f64..5.0) {
        let g = SimpleGraph::unlabeled(5, [(0, 1), (1, 2), (2, 3), (1, 4)]);
        let cent = CentralityVector::compute(&g);
        let corpus = generate_walks(&g, WalkConfig::default(), 0).unwrap();
        let emb = train_skipgram(&corpus, SkipGramConfig { dim: 4, epochs: 1, ..Default::default() }, 0).unwrap().vectors;
        let one = concat_features(&emb, &cent, ConcatWeights { embedding: 1.0, centrality: w }).unwrap();
        let two = concat_features(&emb, &cent, ConcatWeights { embedding: 1.0, centrality: 2.0 * w }).unwrap();
        for i in 0..5 {
            prop_assert_eq!(&one.row(i)[..4], &two.row(i)[..4]);
            for j in 4..7 {
                prop_assert_eq!(two.row(i)[j], 2.0 * one.row(i)[j]);
            }
        }
    }
}
