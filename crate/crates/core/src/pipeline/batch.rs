//! Hash-partitioned batches and per-batch preference smoothing.

use serde::Serialize;

use crate::dynamics::SparseMatrix;
use crate::error::{Error, Result};
use crate::model::{FeatureMatrix, Hypergraph};
use crate::rng::fnv1a;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    /// Node indices per batch, ascending; disjoint and covering.
    pub partitions: Vec<Vec<usize>>,
    pub max_iter: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub rounds: usize,
    /// Largest per-node change in the last round (∞-norm over features).
    pub final_delta: f64,
}

/// Assigns node `v` to batch `fnv1a(id) mod n_batches`.
pub fn batch_partition(h: &Hypergraph, n_batches: usize, max_iter: usize, eps: f64) -> Result<BatchPlan> {
    if n_batches < 1 {
        return Err(Error::Config("N_batches must be at least 1".into()));
    }
    let mut partitions = vec![Vec::new(); n_batches];
    for (v, name) in h.nodes().names().iter().enumerate() {
        partitions[(fnv1a(name) % n_batches as u64) as usize].push(v);
    }
    Ok(BatchPlan {
        partitions,
        max_iter,
        eps,
    })
}

impl BatchPlan {
    /// Rounds of `H ← W H`, one batch at a time: rows of a batch update from
    /// the current state (which already holds earlier batches of the round).
    /// Stops after `max_iter` rounds or once a round moves no row by `eps`.
    pub fn smooth(&self, w: &SparseMatrix, h: &FeatureMatrix) -> Result<(FeatureMatrix, SmoothingReport)> {
        let n = h.num_rows();
        if w.n() != n {
            return Err(Error::Config(format!("weights are {}×{}, features have {n} rows", w.n(), w.n())));
        }
        let covered: usize = self.partitions.iter().map(Vec::len).sum();
        if covered != n {
            return Err(Error::Config(format!("batches cover {covered} nodes, features have {n} rows")));
        }
        let dim = h.dim();
        let mut state = h.as_slice().to_vec();
        let mut report = SmoothingReport {
            rounds: 0,
            final_delta: 0.0,
        };
        let mut next = vec![0.0; dim];
        let mut staged: Vec<f64> = Vec::new();
        while report.rounds < self.max_iter {
            let mut delta: f64 = 0.0;
            for batch in &self.partitions {
                staged.clear();
                for &i in batch {
                    next.iter_mut().for_each(|x| *x = 0.0);
                    for &(j, wij) in w.row(i) {
                        for (acc, &x) in next.iter_mut().zip(&state[j * dim..(j + 1) * dim]) {
                            *acc += wij * x;
                        }
                    }
                    staged.extend_from_slice(&next);
                }
                for (slot, &i) in batch.iter().enumerate() {
                    let new = &staged[slot * dim..(slot + 1) * dim];
                    let old = &mut state[i * dim..(i + 1) * dim];
                    for (o, &v) in old.iter_mut().zip(new) {
                        delta = delta.max((v - *o).abs());
                        *o = v;
                    }
                }
            }
            report.rounds += 1;
            report.final_delta = delta;
            if delta < self.eps {
                break;
            }
        }
        Ok((FeatureMatrix::new(h.labels().to_vec(), dim, state)?, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::IdMap;
    use crate::model::{Hyperedge, HyperedgeKind};

    fn hypergraph(n: usize) -> Hypergraph {
        let nodes = IdMap::from_sorted_names((0..n).map(|i| i.to_string()));
        let edges = vec![Hyperedge {
            members: (0..n).collect(),
            kind: HyperedgeKind::CoInteraction,
            anchor: Some("x".into()),
            window: None,
        }];
        Hypergraph::new(nodes, edges).unwrap()
    }

    #[test]
    fn partitions_cover_disjointly() {
        let h = hypergraph(300);
        for n in [1, 2, 7, 12] {
            let plan = batch_partition(&h, n, 1, 1e-6).unwrap();
            assert_eq!(plan.partitions.len(), n);
            let mut all: Vec<usize> = plan.partitions.concat();
            all.sort_unstable();
            assert_eq!(all, (0..300).collect::<Vec<_>>());
        }
        assert_eq!(batch_partition(&h, 1, 1, 1e-6).unwrap().partitions[0], (0..300).collect::<Vec<_>>());
        assert!(batch_partition(&h, 0, 1, 1e-6).is_err());
    }

    #[test]
    fn one_batch_is_plain_iteration() {
        let w = SparseMatrix::from_dense(&[vec![0.5, 0.5, 0.0], vec![0.25, 0.5, 0.25], vec![0.0, 0.5, 0.5]]);
        let h = FeatureMatrix::from_rows(
            vec!["0".into(), "1".into(), "2".into()],
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]],
        )
        .unwrap();
        let plan = batch_partition(&hypergraph(3), 1, 3, 1e-300).unwrap();
        let (got, rep) = plan.smooth(&w, &h).unwrap();
        let mut x = h.as_slice().to_vec();
        for _ in 0..3 {
            x = w.mul_rows(&x, 2);
        }
        assert_eq!(got.as_slice(), &x[..]);
        assert_eq!(rep.rounds, 3);
    }
}
