use cyberswarm::model::{DedupRule, FeatureMatrix, InteractionStore, RawRating};
use cyberswarm::recommender::{
    cosine_similarity, euclidean_similarity, jaccard_similarity, score, score_users, top_k, Metric, ScoreRow,
    SimilarityConfig, SimilaritySpace,
};
use cyberswarm::rng;
use proptest::prelude::*;
use rand::Rng;

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 4)
}

fn random_store(seed: u64, users: usize, items: usize) -> InteractionStore {
    let mut r = rng::seeded(seed);
    let mut rows = Vec::new();
    for u in 0..users {
        for i in 0..items {
            if r.gen::<f64>() < 0.3 {
                rows.push(RawRating {
                    user: format!("{u}"),
                    item: format!("{i}"),
                    rating: r.gen_range(0..=5) as f64,
                    timestamp: None,
                });
            }
        }
    }
    InteractionStore::from_records(rows, DedupRule::KeepMax).unwrap()
}

fn features_for(store: &InteractionStore, seed: u64) -> FeatureMatrix {
    let mut r = rng::seeded(seed ^ 0xfe);
    let rows: Vec<Vec<f64>> = (0..store.num_users()).map(|_| (0..6).map(|_| r.gen::<f64>() - 0.3).collect()).collect();
    FeatureMatrix::from_rows(store.users().names().to_vec(), &rows).unwrap()
}

proptest! {
    #[test]
    fn similarities_are_symmetric(x in vector(), y in vector()) {
        prop_assert_eq!(euclidean_similarity(&x, &y).unwrap(), euclidean_similarity(&y, &x).unwrap());
        let e = euclidean_similarity(&x, &y).unwrap();
        prop_assert!(e > 0.0 && e <= 1.0);
        prop_assert_eq!(e == 1.0, x == y);
        if let (Ok(a), Ok(b)) = (cosine_similarity(&x, &y), cosine_similarity(&y, &x)) {
            prop_assert!((a - b).abs() < 1e-15);
            prop_assert!((-1.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn jaccard_is_symmetric_and_bounded(
        a in prop::collection::btree_set(0usize..20, 0..10),
        b in prop::collection::btree_set(0usize..20, 1..10),
    ) {
        let a: Vec<usize> = a.into_iter().collect();
        let b: Vec<usize> = b.into_iter().collect();
        let s = jaccard_similarity(&a, &b).unwrap();
        prop_assert_eq!(s, jaccard_similarity(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn scores_scale_linearly(seed in 0u64..5000, c in 0.1..10.0f64) {
        let s = random_store(seed, 8, 30);
        let mut r = rng::seeded(seed);
        let nbrs: Vec<(usize, f64)> = (1..s.num_users()).map(|v| (v, r.gen::<f64>())).collect();
        let scaled: Vec<(usize, f64)> = nbrs.iter().map(|&(v, w)| (v, c * w)).collect();
        let a = score(0, &nbrs, &s, 1.0);
        let b = score(0, &scaled, &s, 1.0);
        for (x, y) in a.scores.iter().zip(&b.scores) {
            prop_assert!((c * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
        let ka: Vec<usize> = top_k(&a, 10).unwrap().iter().map(|p| p.0).collect();
        let kb: Vec<usize> = top_k(&b, 10).unwrap().iter().map(|p| p.0).collect();
        // Order can only differ where scaled scores tie after rounding.
        if ka != kb {
            for (i, j) in ka.iter().zip(&kb) {
                prop_assert!((a.scores[*i] - a.scores[*j]).abs() <= 1e-12 * (1.0 + a.scores[*i].abs()));
            }
        }
    }

    #[test]
    fn top_k_is_a_prefix_and_excludes_rated(
        scores in prop::collection::vec(0.0..3.0f64, 1..40),
        mask in prop::collection::vec(any::<bool>(), 40),
        k1 in 1usize..20,
        extra in 0usize..20,
    ) {
        let n = scores.len();
        let row = ScoreRow { user: 0, scores: scores.iter().map(|s| (s * 4.0).round() / 4.0).collect(), rated: mask[..n].to_vec() };
        let a = top_k(&row, k1).unwrap();
        let b = top_k(&row, k1 + extra).unwrap();
        prop_assert_eq!(&b[..a.len()], &a[..]);
        prop_assert!(b.iter().all(|&(i, _)| !row.rated[i]));
        prop_assert!(b.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
    }
}

#[test]
fn neighbor_lists_exclude_self_and_respect_m() {
    let s = random_store(4, 20, 40);
    let f = features_for(&s, 4);
    for metric in Metric::ALL {
        let cfg = SimilarityConfig { metric, neighbors: 5, ..Default::default() };
        let space = SimilaritySpace::new(&f, &s, cfg).unwrap();
        for u in 0..f.num_rows() {
            let n = space.neighbors(u);
            assert!(n.len() <= 5);
            assert!(n.iter().all(|&(v, _)| v != u));
            assert!(n.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
            // nothing outside the list beats its last member
            if let Some(&(_, worst)) = n.last() {
                for v in (0..f.num_rows()).filter(|&v| v != u && n.iter().all(|p| p.0 != v)) {
                    if let Ok(sv) = space.similarity(u, v) {
                        assert!(sv <= worst);
                    }
                }
            }
        }
    }
}

#[test]
fn scoring_is_thread_count_invariant() {
    let s = random_store(7, 40, 80);
    let f = features_for(&s, 7);
    let users: Vec<usize> = (0..s.num_users()).collect();
    let cfg = SimilarityConfig::default();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = one.install(|| score_users(&users, &f, &s, cfg, 1.0).unwrap());
    let b = score_users(&users, &f, &s, cfg, 1.0).unwrap();
    assert_eq!(a, b);
}
