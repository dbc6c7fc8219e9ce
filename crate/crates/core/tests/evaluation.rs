mod common;

use std::collections::BTreeMap;

use cyberswarm::evaluation::{compute_metrics, split, EvalProtocol, MetricValues, SplitMode};
use cyberswarm::model::{DedupRule, InteractionStore, RawRating};
use cyberswarm::oracles::oracle_metrics;
use proptest::prelude::*;

fn close(a: &MetricValues, hr: f64, mrr: f64, ndcg: f64, precision: f64, recall: f64, tol: f64) -> bool {
    (a.hr - hr).abs() <= tol
        && (a.mrr - mrr).abs() <= tol
        && (a.ndcg - ndcg).abs() <= tol
        && (a.precision - precision).abs() <= tol
        && (a.recall - recall).abs() <= tol
}

#[test]
fn matches_oracle_on_random_instances() {
    for seed in 0..1000 {
        let inst = common::ranking_instance(seed);
        let got = compute_metrics(&inst.rankings, &inst.relevant, &inst.ks).unwrap();
        let want = oracle_metrics(&inst.rankings, &inst.relevant, &inst.ks).unwrap();
        for k in &inst.ks {
            let o = want.values[k];
            assert!(
                close(&got.per_k[k], o.hr, o.mrr, o.ndcg, o.precision, o.recall, 1e-12),
                "seed {seed} k {k}: {:?} vs {:?}",
                got.per_k[k],
                o
            );
        }
    }
}

#[test]
fn single_relevant_identities() {
    let ranking: Vec<usize> = (0..30).collect();
    for rank in 1..=30usize {
        let rel = vec![vec![rank - 1]];
        let ks: Vec<usize> = (1..=30).collect();
        let m = compute_metrics(&[ranking.clone()], &rel, &ks).unwrap();
        for &k in &ks {
            let v = m.per_k[&k];
            assert_eq!(v.recall, v.hr);
            let want = if rank <= k { 1.0 / ((rank + 1) as f64).log2() } else { 0.0 };
            assert!((v.ndcg - want).abs() < 1e-15);
        }
    }
}

fn rated_store(users: usize, items: usize, seed: u64, timestamps: bool) -> InteractionStore {
    use rand::Rng;
    let mut r = cyberswarm::rng::seeded(seed);
    let mut rows = Vec::new();
    for u in 0..users {
        for i in 0..items {
            if r.gen::<f64>() < 0.3 {
                rows.push(RawRating {
                    user: format!("{u}"),
                    item: format!("{i}"),
                    rating: r.gen_range(1..=5) as f64,
                    timestamp: timestamps.then(|| r.gen_range(0..1000)),
                });
            }
        }
    }
    InteractionStore::from_records(rows, DedupRule::KeepMax).unwrap()
}

#[test]
fn split_contract() {
    for (seed, ts) in [(1, true), (2, false)] {
        let s = rated_store(60, 200, seed, ts);
        let p = EvalProtocol { seed, ..Default::default() };
        let sp = split(&s, &p).unwrap();
        assert_eq!(sp.mode, if ts { SplitMode::ByTime } else { SplitMode::Random });
        let multi = (0..s.num_users()).filter(|&u| s.user_entries(u).len() >= 2).count();
        assert_eq!(sp.held_out.len(), multi);
        assert_eq!(sp.train.len(), s.len() - multi);
        for (n, h) in sp.held_out.iter().enumerate() {
            assert!(sp.train.rating(h.user, h.item).is_none());
            assert_eq!(s.rating(h.user, h.item), Some(h.rating));
            if ts {
                let latest = s.user_entries(h.user).iter().map(|e| e.timestamp).max().unwrap();
                let mine = s.user_entries(h.user).iter().find(|e| e.item == h.item).unwrap().timestamp;
                assert_eq!(mine, latest);
            }
            let negs = &sp.negatives[n];
            assert!(negs.windows(2).all(|w| w[0] < w[1]));
            assert!(negs.iter().all(|&i| s.rating(h.user, i).is_none()));
            let unseen = s.num_items() - s.user_entries(h.user).len();
            assert_eq!(negs.len(), unseen.min(99));
        }
    }
}

#[test]
fn full_ranking_mode_uses_every_unseen_item() {
    let s = rated_store(10, 40, 3, false);
    let p = EvalProtocol { negatives: 0, ..Default::default() };
    let sp = split(&s, &p).unwrap();
    for (n, h) in sp.held_out.iter().enumerate() {
        assert_eq!(sp.negatives[n].len(), s.num_items() - s.user_entries(h.user).len());
    }
}

fn as_map(m: &cyberswarm::evaluation::MetricSummary) -> BTreeMap<usize, MetricValues> {
    m.per_k.clone()
}

proptest! {
    #[test]
    fn monotone_in_k(seed in 0u64..10_000) {
        let inst = common::ranking_instance(seed);
        let ks: Vec<usize> = (1..=64).collect();
        let m = as_map(&compute_metrics(&inst.rankings, &inst.relevant, &ks).unwrap());
        for k in 1..64 {
            let (a, b) = (m[&k], m[&(k + 1)]);
            prop_assert!(b.hr >= a.hr);
            prop_assert!(b.recall >= a.recall - 1e-15);
            prop_assert!(b.precision * (k + 1) as f64 >= a.precision * k as f64 - 1e-12);
            for v in [a.hr, a.mrr, a.ndcg, a.precision, a.recall] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }
    }

    #[test]
    fn tail_beyond_k_is_irrelevant(seed in 0u64..10_000) {
        let inst = common::ranking_instance(seed);
        let kmax = *inst.ks.last().unwrap();
        let cut: Vec<Vec<usize>> = inst.rankings.iter().map(|r| r.iter().take(kmax).copied().collect()).collect();
        let a = compute_metrics(&inst.rankings, &inst.relevant, &inst.ks).unwrap();
        let b = compute_metrics(&cut, &inst.relevant, &inst.ks).unwrap();
        prop_assert_eq!(a.per_k, b.per_k);
    }

    #[test]
    fn splits_are_deterministic(seed in 0u64..1000) {
        let s = rated_store(15, 50, seed, false);
        let p = EvalProtocol { seed, split: SplitMode::Random, ..Default::default() };
        let a = split(&s, &p).unwrap();
        let b = split(&s, &p).unwrap();
        prop_assert_eq!(a.held_out, b.held_out);
        prop_assert_eq!(a.negatives, b.negatives);
    }
}
