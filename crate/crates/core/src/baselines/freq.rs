//! Frequency thresholding: aggregate every label a neighbor sends, score
//! with the Jacobi update, zero out weights below a threshold and keep the
//! best `k`.

use rustc_hash::FxHashMap;

use crate::graph::{Graph, NodeIndex};
use crate::kernel::{propagate_with, Inbound, Propagation, UpdateKernel};
use crate::labels::{LabelIndex, SeedLabels, SparseLabelDist};
use crate::params::{Hyperparams, UpdateRule};
use crate::streaming::initial_dist;

pub struct FreqThreshKernel<'a> {
    graph: &'a Graph,
    seeds: &'a SeedLabels,
    rule: UpdateRule,
    k: usize,
    threshold: f64,
}

impl<'a> FreqThreshKernel<'a> {
    pub fn new(graph: &'a Graph, seeds: &'a SeedLabels, params: &Hyperparams, threshold: f64) -> Self {
        assert!(threshold > 0.0, "threshold must be positive");
        FreqThreshKernel {
            graph,
            seeds,
            rule: params.update_rule(seeds.label_count()),
            k: params.k,
            threshold,
        }
    }
}

impl UpdateKernel for FreqThreshKernel<'_> {
    type Message = SparseLabelDist;

    fn initial(&self, v: NodeIndex) -> SparseLabelDist {
        initial_dist(self.seeds, v, self.k)
    }

    fn update(&self, v: NodeIndex, inbox: &[Inbound<'_, SparseLabelDist>]) -> SparseLabelDist {
        // Every label starts from the summed residual mass; a label a neighbor
        // stores explicitly swaps that neighbor's residual for its real weight.
        let mut residual_mass = 0.0;
        let mut explicit: FxHashMap<LabelIndex, f64> = FxHashMap::default();
        for msg in inbox {
            let r = msg.message.residual();
            residual_mass += msg.weight * r;
            for &(l, p) in msg.message.entries() {
                *explicit.entry(l).or_insert(0.0) += msg.weight * (p - r);
            }
        }
        let seed = self.seeds.seed(v);
        for &(l, _) in seed {
            explicit.entry(l).or_insert(0.0);
        }
        let normalizer = self.rule.normalizer(!seed.is_empty(), self.graph.weighted_degree(v));
        assert!(normalizer > 0.0, "zero normalizer at node {v}");
        let scores = explicit
            .into_iter()
            .map(|(l, correction)| {
                let y = self.seeds.seed_weight(v, l);
                (l, self.rule.value(y, residual_mass + correction, self.rule.prior, normalizer))
            })
            .filter(|&(_, score)| score >= self.threshold)
            .collect();
        SparseLabelDist::from_scores(scores, self.seeds.label_count(), self.k)
    }

    fn stored_entries(&self, message: &SparseLabelDist) -> usize {
        message.len()
    }

    fn output(&self, message: &SparseLabelDist) -> SparseLabelDist {
        message.clone()
    }
}

pub fn run_freq_thresh(graph: &Graph, seeds: &SeedLabels, params: &Hyperparams, threshold: f64) -> Propagation {
    let kernel = FreqThreshKernel::new(graph, seeds, params, threshold);
    propagate_with(&kernel, graph, params.iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::run_exact;
    use crate::graph::GraphBuilder;

    fn star() -> (Graph, SeedLabels) {
        let mut b = GraphBuilder::new();
        for i in 0..5 {
            b.add_node(&format!("n{i}"));
        }
        for leaf in 1..5 {
            b.add_edge(0, leaf, 1.0);
        }
        let a = [(1, "L0"), (2, "L0"), (3, "L0"), (4, "L1")]
            .map(|(v, l)| (v, l.to_string(), 1.0))
            .to_vec();
        (b.build(), SeedLabels::from_assignments(5, ["L0", "L1", "L2"], &a))
    }

    #[test]
    fn full_capacity_with_tiny_threshold_matches_exact() {
        let (g, s) = star();
        let p = Hyperparams {
            k: 3,
            ..Default::default()
        };
        let out = run_freq_thresh(&g, &s, &p, 1e-12);
        let exact = run_exact(&g, &s, &p);
        for v in 0..5 {
            let row = out.dists[v].densify(3);
            for l in 0..3 {
                assert!((row[l] - exact.state.row(v)[l]).abs() < 1e-12, "node {v} label {l}");
            }
        }
    }

    #[test]
    fn small_scores_are_dropped() {
        // Seed node, one neighbor that stores L1 at 0.05:
        // L1 = 0.01 * 0.05 / 1.01 ~ 0.000495 < 0.001.
        let mut b = GraphBuilder::new();
        b.add_node("a");
        b.add_node("b");
        b.add_edge(0, 1, 1.0);
        let g = b.build();
        let s = SeedLabels::from_assignments(2, ["L0", "L1"], &[(0, "L0".to_string(), 1.0)]);
        let p = Hyperparams {
            k: 2,
            mu3: 0.0,
            ..Default::default()
        };
        let kernel = FreqThreshKernel::new(&g, &s, &p, 0.001);
        let msg = SparseLabelDist::with_residual(vec![(0, 0.95), (1, 0.05)], 0.0);
        let out = kernel.update(
            0,
            &[Inbound {
                source: 1,
                weight: 1.0,
                message: &msg,
            }],
        );
        assert_eq!(out.ranked_labels().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn star_center_argmax_matches_exact() {
        let (g, s) = star();
        let p = Hyperparams {
            k: 1,
            ..Default::default()
        };
        let out = run_freq_thresh(&g, &s, &p, 0.001);
        assert_eq!(out.dists[0].ranked_labels().next(), Some(0));
    }
}
