use cyberswarm::centrality::{betweenness, closeness, degree, project_hypergraph, CentralityVector};
use cyberswarm::model::{Hyperedge, HyperedgeKind, Hypergraph, SimpleGraph};
use cyberswarm::oracles::{oracle_centrality, oracle_closeness};
use cyberswarm::IdMap;
use proptest::prelude::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = SimpleGraph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .collect();
        let m = pairs.len();
        (0.1f64..0.7, proptest::collection::vec(0.0f64..1.0, m)).prop_map(move |(p, draws)| {
            let edges = pairs
                .iter()
                .zip(&draws)
                .filter(|(_, &d)| d < p)
                .map(|(&e, _)| e);
            SimpleGraph::unlabeled(n, edges)
        })
    })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn matches_enumeration_oracle(g in graph_strategy(25)) {
        let o = oracle_centrality(&g).unwrap().values;
        prop_assert!(close(&degree(&g), &o.degree, 0.0));
        prop_assert!(close(&closeness(&g), &o.closeness, 1e-12));
        prop_assert!(close(&betweenness(&g), &o.betweenness, 1e-9));
    }

    #[test]
    fn closeness_matches_bfs_oracle_up_to_forty(g in graph_strategy(40)) {
        prop_assert!(close(&closeness(&g), &oracle_closeness(&g).unwrap(), 1e-12));
    }

    #[test]
    fn permutation_equivariant(g in graph_strategy(20), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let n = g.num_nodes();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut cyberswarm::rng::seeded(seed));
        let h = g.permuted(&perm);
        let (a, b) = (CentralityVector::compute(&g), CentralityVector::compute(&h));
        for i in 0..n {
            prop_assert_eq!(a.degree[i], b.degree[perm[i]]);
            prop_assert!((a.closeness[i] - b.closeness[perm[i]]).abs() < 1e-12);
            prop_assert!((a.betweenness[i] - b.betweenness[perm[i]]).abs() < 1e-9);
        }
    }

    #[test]
    fn degree_bounds_and_handshake(g in graph_strategy(30)) {
        let d = degree(&g);
        let n = g.num_nodes() as f64;
        prop_assert!(d.iter().all(|&x| x <= n - 1.0));
        prop_assert_eq!(d.iter().sum::<f64>(), 2.0 * g.num_edges() as f64);
    }

    #[test]
    fn leaves_carry_no_betweenness(g in graph_strategy(30)) {
        let b = betweenness(&g);
        for v in 0..g.num_nodes() {
            if g.degree(v) == 1 {
                prop_assert_eq!(b[v], 0.0);
            }
            prop_assert!(b[v] >= 0.0);
        }
    }

    #[test]
    fn projection_adjacency_is_co_membership(groups in proptest::collection::vec(proptest::collection::btree_set(0usize..12, 2..5), 0..6)) {
        let nodes = IdMap::from_sorted_names((0..12).map(|i| i.to_string()));
        let edges: Vec<Hyperedge> = groups
            .iter()
            .map(|s| Hyperedge {
                members: s.iter().copied().collect(),
                kind: HyperedgeKind::CoPreference,
                anchor: None,
                window: None,
            })
            .collect();
        let h = Hypergraph::new(nodes, edges).unwrap();
        let g = project_hypergraph(&h);
        for a in 0..12 {
            for b in 0..12 {
                let shared = a != b && groups.iter().any(|s| s.contains(&a) && s.contains(&b));
                prop_assert_eq!(g.has_edge(a, b), shared);
            }
        }
    }
}

#[test]
fn star_center_has_maximal_closeness() {
    for n in 2..12 {
        let g = SimpleGraph::unlabeled(n, (1..n).map(|i| (0, i)));
        let c = closeness(&g);
        assert_eq!(c[0], 1.0 / (n - 1) as f64);
        assert!(c.iter().all(|&x| x <= c[0]));
    }
}

#[test]
fn disconnected_closeness_stays_in_component() {
    // path 0-1-2 plus edge 3-4
    let g = SimpleGraph::unlabeled(5, [(0, 1), (1, 2), (3, 4)]);
    assert_eq!(closeness(&g), vec![1.0 / 3.0, 0.5, 1.0 / 3.0, 1.0, 1.0]);
}

#[test]
fn parallel_and_serial_betweenness_agree_bitwise() {
    use rand::Rng;
    let mut rng = cyberswarm::rng::seeded(3);
    let n = 300;
    let edges: Vec<(usize, usize)> = (0..n * 4).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
    let g = SimpleGraph::unlabeled(n, edges);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| betweenness(&g));
    assert_eq!(serial, betweenness(&g));
}
