//! Streaming top-k label aggregation.
//!
//! A node treats each neighbor message as one weighted epoch of a lossy
//! counting stream. For every label it keeps a tuple `(l, f, delta)`: `f` is
//! the weighted probability accumulated since the tuple was created and
//! `delta` bounds what earlier epochs could have contributed. A neighbor that
//! stores only its top-k labels spreads the rest of its mass evenly over the
//! labels it left out; that per-label residual is what unsent labels receive.
//!
//! After epoch `t` any tuple with `f + delta <= sum_{i<=t} w_i * residual_i`
//! is dropped. Once every neighbor has been consumed, the surviving tuples
//! are ranked by `f + delta` and the node keeps the best `k`.

use std::sync::atomic::{AtomicUsize, Ordering};

use rustc_hash::FxHashMap;

use crate::graph::{Graph, NodeIndex};
use crate::kernel::{propagate_with, Inbound, Propagation, UpdateKernel};
use crate::labels::{LabelIndex, SeedLabels, SparseLabelDist};
use crate::params::{DeltaMode, Hyperparams, UpdateRule};

/// Relative slack allowed for rounding in [`check_sandwich_bound`].
pub const SANDWICH_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelTuple {
    pub label: LabelIndex,
    /// Weighted probability accumulated since insertion.
    pub f: f64,
    /// Maximum error: stream mass processed before insertion.
    pub delta: f64,
    touched: usize,
}

impl LabelTuple {
    /// Upper estimate of the label's aggregate, used for ranking.
    pub fn upper(&self) -> f64 {
        self.f + self.delta
    }
}

/// Per-node scratch accumulator for one aggregation pass.
#[derive(Clone, Debug)]
pub struct TupleList {
    tuples: FxHashMap<LabelIndex, LabelTuple>,
    processed_mass: f64,
    epoch: usize,
    mode: DeltaMode,
    uniform_residual: f64,
    peak_len: usize,
}

impl TupleList {
    /// An empty list for a label space of size `m`.
    pub fn new(mode: DeltaMode, m: usize) -> Self {
        TupleList {
            tuples: FxHashMap::default(),
            processed_mass: 0.0,
            epoch: 0,
            mode,
            uniform_residual: if m > 0 { 1.0 / m as f64 } else { 0.0 },
            peak_len: 0,
        }
    }

    /// `sum_{i<=t} w_i * residual_i` over the epochs consumed so far.
    pub fn processed_mass(&self) -> f64 {
        self.processed_mass
    }

    /// Number of neighbors consumed.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Largest size reached before pruning.
    pub fn peak_len(&self) -> usize {
        self.peak_len
    }

    pub fn get(&self, l: LabelIndex) -> Option<&LabelTuple> {
        self.tuples.get(&l)
    }

    /// Tuples in label order.
    pub fn tuples(&self) -> Vec<LabelTuple> {
        let mut all: Vec<LabelTuple> = self.tuples.values().copied().collect();
        all.sort_by_key(|t| t.label);
        all
    }

    /// The residual charged to labels missing from `msg`.
    pub fn residual_for(&self, msg: &SparseLabelDist) -> f64 {
        match self.mode {
            DeltaMode::Adaptive => msg.residual(),
            DeltaMode::Uniform => self.uniform_residual,
        }
    }

    /// Consumes the message of the next neighbor, reached through an edge of
    /// weight `w`.
    pub fn consume_neighbor(&mut self, msg: &SparseLabelDist, w: f64) {
        debug_assert!(w >= 0.0);
        let residual = self.residual_for(msg);
        self.epoch += 1;
        let epoch = self.epoch;
        let before = self.processed_mass;

        for &(l, p) in msg.entries() {
            self.tuples
                .entry(l)
                .and_modify(|t| {
                    t.f += w * p;
                    t.touched = epoch;
                })
                .or_insert(LabelTuple {
                    label: l,
                    f: w * p,
                    delta: before,
                    touched: epoch,
                });
        }
        self.peak_len = self.peak_len.max(self.tuples.len());

        let spread = w * residual;
        if spread != 0.0 {
            for t in self.tuples.values_mut() {
                if t.touched != epoch {
                    t.f += spread;
                }
            }
        }
        self.processed_mass += spread;

        let threshold = self.processed_mass;
        self.tuples.retain(|_, t| t.upper() > threshold);
    }

    /// Best `k` tuples by `f + delta`, ties to the lower label index.
    pub fn top(&self, k: usize) -> Vec<LabelTuple> {
        let mut ranked: Vec<LabelTuple> = self.tuples.values().copied().collect();
        ranked.sort_by(|a, b| b.upper().total_cmp(&a.upper()).then(a.label.cmp(&b.label)));
        ranked.truncate(k);
        ranked
    }
}

/// Turns a fully consumed tuple list into the node's new top-k distribution.
///
/// Candidates are the best `k` tuples plus every seed label of the node. Each
/// candidate is scored with the Jacobi update, using `f + delta` as the
/// neighbor aggregate (or the processed mass for a seed label that has no
/// tuple). The result keeps the best `k` scores.
pub fn finalize_node(
    list: &TupleList,
    seed: &[(LabelIndex, f64)],
    params: &Hyperparams,
    m: usize,
    weighted_degree: f64,
) -> SparseLabelDist {
    finalize_with_rule(list, seed, &params.update_rule(m), params.k, m, weighted_degree)
}

fn finalize_with_rule(
    list: &TupleList,
    seed: &[(LabelIndex, f64)],
    rule: &UpdateRule,
    k: usize,
    m: usize,
    weighted_degree: f64,
) -> SparseLabelDist {
    let mut candidates: Vec<(LabelIndex, f64)> = list.top(k).iter().map(|t| (t.label, t.upper())).collect();
    for &(l, _) in seed {
        if !candidates.iter().any(|c| c.0 == l) {
            let aggregate = list.get(l).map_or(list.processed_mass(), LabelTuple::upper);
            candidates.push((l, aggregate));
        }
    }
    let normalizer = rule.normalizer(!seed.is_empty(), weighted_degree);
    assert!(normalizer > 0.0, "zero normalizer");
    let seed_weight = |l: LabelIndex| {
        seed.binary_search_by_key(&l, |e| e.0)
            .map_or(0.0, |i| seed[i].1)
    };
    let scores = candidates
        .into_iter()
        .map(|(l, aggregate)| (l, rule.value(seed_weight(l), aggregate, rule.prior, normalizer)))
        .collect();
    SparseLabelDist::from_scores(scores, m, k)
}

/// Checks the lossy-counting guarantee of a consumed list against the exact
/// aggregate `y_l = sum_u w_u * (stored weight of l at u, else residual of u)`
/// of the same stream: every kept tuple satisfies `f <= y <= f + delta` and
/// every other label satisfies `y <= processed mass`. Comparisons allow a
/// relative rounding slack of [`SANDWICH_SLACK`].
pub fn check_sandwich_bound(list: &TupleList, exact_aggregate: &[f64]) -> bool {
    let scale = 1.0 + list.processed_mass() + exact_aggregate.iter().fold(0.0, |a: f64, &b| a.max(b));
    let slack = SANDWICH_SLACK * scale;
    exact_aggregate.iter().enumerate().all(|(l, &y)| match list.get(l as LabelIndex) {
        Some(t) => t.f <= y + slack && y <= t.upper() + slack,
        None => y <= list.processed_mass() + slack,
    })
}

/// Initial state: seeds keep up to `k` of their labels, every other node
/// stores nothing and holds all of its mass in a `1/m` residual.
pub fn initial_dist(seeds: &SeedLabels, v: NodeIndex, k: usize) -> SparseLabelDist {
    let m = seeds.label_count();
    if seeds.is_seed(v) {
        SparseLabelDist::from_scores(seeds.seed(v).to_vec(), m, k)
    } else {
        SparseLabelDist::uniform(m)
    }
}

pub struct StreamingKernel<'a> {
    graph: &'a Graph,
    seeds: &'a SeedLabels,
    rule: UpdateRule,
    k: usize,
    mode: DeltaMode,
    peak_list: AtomicUsize,
}

impl<'a> StreamingKernel<'a> {
    pub fn new(graph: &'a Graph, seeds: &'a SeedLabels, params: &Hyperparams) -> Self {
        StreamingKernel {
            graph,
            seeds,
            rule: params.update_rule(seeds.label_count()),
            k: params.k,
            mode: params.delta_mode,
            peak_list: AtomicUsize::new(0),
        }
    }

    /// Consumes a node's inbox in order, without finalizing.
    pub fn aggregate(&self, inbox: &[Inbound<'_, SparseLabelDist>]) -> TupleList {
        let mut list = TupleList::new(self.mode, self.seeds.label_count());
        for msg in inbox {
            list.consume_neighbor(msg.message, msg.weight);
        }
        list
    }
}

impl UpdateKernel for StreamingKernel<'_> {
    type Message = SparseLabelDist;

    fn initial(&self, v: NodeIndex) -> SparseLabelDist {
        initial_dist(self.seeds, v, self.k)
    }

    fn update(&self, v: NodeIndex, inbox: &[Inbound<'_, SparseLabelDist>]) -> SparseLabelDist {
        let list = self.aggregate(inbox);
        self.peak_list.fetch_max(list.peak_len(), Ordering::Relaxed);
        finalize_with_rule(
            &list,
            self.seeds.seed(v),
            &self.rule,
            self.k,
            self.seeds.label_count(),
            self.graph.weighted_degree(v),
        )
    }

    fn stored_entries(&self, message: &SparseLabelDist) -> usize {
        message.len()
    }

    fn output(&self, message: &SparseLabelDist) -> SparseLabelDist {
        message.clone()
    }

    fn transient_peak(&self) -> usize {
        self.peak_list.load(Ordering::Relaxed)
    }
}

/// Propagation with the streaming top-k store. Each node consumes its
/// neighbors in ascending index order.
pub fn run_streaming(graph: &Graph, seeds: &SeedLabels, params: &Hyperparams) -> Propagation {
    let kernel = StreamingKernel::new(graph, seeds, params);
    propagate_with(&kernel, graph, params.iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::run_exact;
    use crate::graph::GraphBuilder;
    use proptest::prelude::*;

    fn msg(entries: &[(LabelIndex, f64)], residual: f64) -> SparseLabelDist {
        SparseLabelDist::with_residual(entries.to_vec(), residual)
    }

    #[test]
    fn first_epoch_without_residual() {
        let mut list = TupleList::new(DeltaMode::Adaptive, 2);
        list.consume_neighbor(&msg(&[(0, 0.6), (1, 0.4)], 0.0), 2.0);
        let t = list.tuples();
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].label, t[0].f, t[0].delta), (0, 1.2, 0.0));
        assert_eq!((t[1].label, t[1].f, t[1].delta), (1, 0.8, 0.0));
        assert_eq!(list.epoch(), 1);
    }

    #[test]
    fn residual_increment_and_prune_threshold() {
        let mut list = TupleList::new(DeltaMode::Adaptive, 10);
        list.consume_neighbor(&msg(&[(0, 0.001)], 0.0), 1.0);
        list.consume_neighbor(&msg(&[(1, 1.0)], 0.002), 1.0);
        // L0: 0.001 + 1 * 0.002 = 0.003 > processed 0.002, survives.
        let l0 = list.get(0).unwrap();
        assert!((l0.f - 0.003).abs() < 1e-15);
        assert_eq!(l0.delta, 0.0);
        assert!((list.processed_mass() - 0.002).abs() < 1e-15);
        let l1 = list.get(1).unwrap();
        assert_eq!((l1.f, l1.delta), (1.0, 0.0));
    }

    #[test]
    fn low_labels_are_pruned() {
        let mut list = TupleList::new(DeltaMode::Adaptive, 10);
        list.consume_neighbor(&msg(&[(0, 0.01)], 0.1), 1.0);
        // f + delta = 0.01 <= processed mass 0.1
        assert!(list.get(0).is_none());
        assert!(list.is_empty());
        list.consume_neighbor(&msg(&[(1, 0.5)], 0.05), 1.0);
        // inserted late with delta = 0.1
        assert_eq!(list.get(1).unwrap().delta, 0.1);
    }

    #[test]
    fn zero_weight_epoch_changes_nothing() {
        let mut list = TupleList::new(DeltaMode::Adaptive, 4);
        list.consume_neighbor(&msg(&[(0, 0.7), (1, 0.3)], 0.0), 1.0);
        let before = list.tuples();
        list.consume_neighbor(&msg(&[(2, 0.9)], 0.05), 0.0);
        assert_eq!(list.tuples(), before);
        assert_eq!(list.epoch(), 2);
        assert_eq!(list.processed_mass(), 0.0);
    }

    #[test]
    fn uniform_mode_charges_one_over_m() {
        let mut list = TupleList::new(DeltaMode::Uniform, 4);
        list.consume_neighbor(&msg(&[(0, 0.9)], 0.0), 1.0);
        list.consume_neighbor(&msg(&[(1, 0.9)], 0.0), 2.0);
        assert_eq!(list.processed_mass(), 0.75);
        assert_eq!(list.get(0).unwrap().f, 0.9 + 0.5);
        assert_eq!(list.get(1).unwrap().delta, 0.25);
    }

    #[test]
    fn finalize_single_neighbor() {
        let mut list = TupleList::new(DeltaMode::Adaptive, 2);
        list.consume_neighbor(&msg(&[(0, 1.0)], 0.0), 1.0);
        let p = Hyperparams {
            k: 2,
            ..Default::default()
        };
        let d = finalize_node(&list, &[], &p, 2, 1.0);
        // L0: (0.01 * 1 + 0.01 * 0.5) / 0.02, L1 lives in the residual.
        assert!((d.weight(0) - 0.75).abs() < 1e-12);
        assert!((d.weight(1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn finalize_isolated_seed_matches_exact() {
        let mut b = GraphBuilder::new();
        b.add_node("a");
        let g = b.build();
        let s = SeedLabels::from_assignments(1, ["L0", "L1"], &[(0, "L0".to_string(), 1.0)]);
        let p = Hyperparams {
            k: 2,
            iterations: 1,
            ..Default::default()
        };
        let d = finalize_node(&TupleList::new(DeltaMode::Adaptive, 2), s.seed(0), &p, 2, 0.0);
        let exact = run_exact(&g, &s, &p);
        for l in 0..2 {
            assert!((d.weight(l) - exact.state.row(0)[l as usize]).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_ties_prefer_lower_label() {
        let mut list = TupleList::new(DeltaMode::Adaptive, 5);
        list.consume_neighbor(&msg(&[(3, 0.25), (1, 0.25), (2, 0.25), (4, 0.25)], 0.0), 1.0);
        let top: Vec<_> = list.top(2).iter().map(|t| t.label).collect();
        assert_eq!(top, vec![1, 2]);
        let p = Hyperparams {
            k: 2,
            ..Default::default()
        };
        let d = finalize_node(&list, &[], &p, 5, 1.0);
        assert_eq!(d.ranked_labels().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn seed_label_is_never_starved() {
        let mut list = TupleList::new(DeltaMode::Adaptive, 6);
        for _ in 0..4 {
            list.consume_neighbor(&msg(&[(1, 0.6), (2, 0.4)], 0.0), 1.0);
        }
        let p = Hyperparams {
            k: 1,
            ..Default::default()
        };
        let d = finalize_node(&list, &[(5, 1.0)], &p, 6, 4.0);
        assert_eq!(d.ranked_labels().collect::<Vec<_>>(), vec![5]);
    }

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
        (b.build(), SeedLabels::from_assignments(5, ["L0", "L1"], &a))
    }

    #[test]
    fn star_center_keeps_majority_with_k1() {
        let (g, s) = star();
        let p = Hyperparams {
            k: 1,
            ..Default::default()
        };
        let out = run_streaming(&g, &s, &p);
        assert_eq!(out.dists[0].ranked_labels().collect::<Vec<_>>(), vec![0]);
        assert!(out.stats.max_entries_per_node <= 1);
    }

    #[test]
    fn zero_iterations_is_initial_state() {
        let (g, s) = star();
        let p = Hyperparams {
            k: 1,
            iterations: 0,
            ..Default::default()
        };
        let out = run_streaming(&g, &s, &p);
        assert!(out.dists[0].is_empty());
        assert_eq!(out.dists[0].residual(), 0.5);
        assert_eq!(out.dists[4].entries(), &[(1, 1.0)]);
    }

    #[test]
    fn full_capacity_matches_exact_on_star() {
        let (g, s) = star();
        let p = Hyperparams {
            k: 2,
            ..Default::default()
        };
        let streamed = run_streaming(&g, &s, &p);
        let exact = run_exact(&g, &s, &p);
        for v in 0..5 {
            let row = streamed.dists[v].densify(2);
            for l in 0..2 {
                assert!((row[l] - exact.state.row(v)[l]).abs() < 1e-12);
            }
        }
    }

    /// Direct evaluation of the exact aggregate of a message stream.
    fn stream_oracle(stream: &[(SparseLabelDist, f64)], m: usize) -> Vec<f64> {
        (0..m)
            .map(|l| stream.iter().map(|(msg, w)| w * msg.weight(l as LabelIndex)).sum())
            .collect()
    }

    fn arb_message(m: usize) -> impl Strategy<Value = (SparseLabelDist, f64)> {
        (
            proptest::collection::vec(0.0f64..1.0, m),
            1usize..=4,
            0.1f64..3.0,
        )
            .prop_map(move |(raw, k, w)| {
                let total: f64 = raw.iter().sum::<f64>() + 1e-9;
                let scores = raw.iter().enumerate().map(|(l, x)| (l as LabelIndex, x / total)).collect();
                (SparseLabelDist::from_scores(scores, m, k), w)
            })
    }

    proptest! {
        #[test]
        fn sandwich_holds_after_every_epoch(stream in proptest::collection::vec(arb_message(12), 1..25)) {
            let mut list = TupleList::new(DeltaMode::Adaptive, 12);
            let mut last_mass = 0.0;
            for t in 0..stream.len() {
                list.consume_neighbor(&stream[t].0, stream[t].1);
                prop_assert!(list.processed_mass() >= last_mass);
                last_mass = list.processed_mass();
                let oracle = stream_oracle(&stream[..=t], 12);
                prop_assert!(check_sandwich_bound(&list, &oracle));
            }
        }

        #[test]
        fn finalize_respects_capacity(stream in proptest::collection::vec(arb_message(12), 0..25), k in 1usize..6) {
            let mut list = TupleList::new(DeltaMode::Adaptive, 12);
            for (msg, w) in &stream {
                list.consume_neighbor(msg, *w);
            }
            let wdeg: f64 = stream.iter().map(|s| s.1).sum();
            let p = Hyperparams { k, ..Default::default() };
            let d = finalize_node(&list, &[(3, 1.0)], &p, 12, wdeg);
            prop_assert!(d.len() <= k);
            prop_assert!(d.stored_mass() <= 1.0 + crate::labels::MASS_EPSILON);
            prop_assert!(d.residual() >= 0.0);
        }
    }

    #[test]
    fn single_epoch_is_exact() {
        let mut list = TupleList::new(DeltaMode::Adaptive, 5);
        let m = msg(&[(0, 0.5), (3, 0.2)], 0.1);
        list.consume_neighbor(&m, 2.0);
        let oracle = stream_oracle(&[(m, 2.0)], 5);
        assert!(check_sandwich_bound(&list, &oracle));
        assert_eq!(list.get(0).unwrap().f, oracle[0]);
    }

    #[test]
    fn label_seen_once_then_dropped() {
        // L0 arrives only in epoch 1, below that neighbor's residual, so it is
        // pruned at once and its later mass comes from residuals alone.
        let stream = vec![
            (msg(&[(1, 0.8), (0, 0.01)], 0.19 / 3.0), 1.0),
            (msg(&[(1, 0.6), (2, 0.3)], 0.1 / 3.0), 1.0),
            (msg(&[(1, 0.7), (2, 0.2)], 0.1 / 3.0), 1.0),
            (msg(&[(2, 0.5), (3, 0.4)], 0.1 / 3.0), 5.0),
        ];
        let mut list = TupleList::new(DeltaMode::Adaptive, 5);
        for (t, (m, w)) in stream.iter().enumerate() {
            list.consume_neighbor(m, *w);
            let oracle = stream_oracle(&stream[..=t], 5);
            assert!(list.get(0).is_none());
            assert!(oracle[0] <= list.processed_mass());
            assert!(check_sandwich_bound(&list, &oracle));
        }
        assert!(list.get(1).is_some());
    }

    #[test]
    fn sandwich_detects_violations() {
        let mut list = TupleList::new(DeltaMode::Adaptive, 3);
        list.consume_neighbor(&msg(&[(0, 1.0)], 0.0), 1.0);
        assert!(check_sandwich_bound(&list, &[1.0, 0.0, 0.0]));
        assert!(!check_sandwich_bound(&list, &[0.5, 0.0, 0.0]));
        assert!(!check_sandwich_bound(&list, &[1.0, 0.3, 0.0]));
    }
}
