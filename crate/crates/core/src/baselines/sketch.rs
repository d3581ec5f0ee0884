//! Count-min sketch label store.
//!
//! Every node keeps a `depth x width` table of non-negative counters. Rows
//! hash labels with `((a * l + b) mod p) mod width` for `p = 2^61 - 1`. All
//! nodes share one hasher, which makes sketches linear: the weighted sum of
//! neighbor sketches is the sketch of the weighted sum of their
//! distributions, so aggregation happens directly in sketch space.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, NodeIndex};
use crate::kernel::{propagate_with, Inbound, Propagation, UpdateKernel};
use crate::labels::{LabelIndex, SeedLabels, SparseLabelDist};
use crate::params::{Hyperparams, UpdateRule};

const MERSENNE_61: u64 = (1 << 61) - 1;

/// `depth` hash functions into `[0, width)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SketchHasher {
    width: usize,
    rows: Vec<(u64, u64)>,
}

impl SketchHasher {
    pub fn new(width: usize, depth: usize, seed: u64) -> Self {
        assert!(width > 0 && depth > 0, "sketch dimensions must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..depth)
            .map(|_| (rng.random_range(1..MERSENNE_61), rng.random_range(0..MERSENNE_61)))
            .collect();
        SketchHasher { width, rows }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn bucket(&self, row: usize, label: LabelIndex) -> usize {
        let (a, b) = self.rows[row];
        let h = (a as u128 * label as u128 + b as u128) % MERSENNE_61 as u128;
        (h % self.width as u128) as usize
    }

    /// True when no two of the first `m` labels share a bucket in `row`.
    pub fn row_is_injective(&self, row: usize, m: usize) -> bool {
        let mut seen = vec![false; self.width];
        (0..m as LabelIndex).all(|l| !std::mem::replace(&mut seen[self.bucket(row, l)], true))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountMinSketch {
    hasher: Arc<SketchHasher>,
    cells: Vec<f64>,
}

impl CountMinSketch {
    pub fn new(hasher: Arc<SketchHasher>) -> Self {
        let cells = vec![0.0; hasher.width() * hasher.depth()];
        CountMinSketch { hasher, cells }
    }

    pub fn hasher(&self) -> &Arc<SketchHasher> {
        &self.hasher
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn update(&mut self, label: LabelIndex, amount: f64) {
        debug_assert!(amount >= 0.0);
        let w = self.hasher.width();
        for row in 0..self.hasher.depth() {
            let c = row * w + self.hasher.bucket(row, label);
            self.cells[c] += amount;
        }
    }

    /// Row minimum; never below the true accumulated value.
    pub fn estimate(&self, label: LabelIndex) -> f64 {
        let w = self.hasher.width();
        (0..self.hasher.depth())
            .map(|row| self.cells[row * w + self.hasher.bucket(row, label)])
            .fold(f64::INFINITY, f64::min)
    }

    /// `self += alpha * other`, cell-wise.
    pub fn add_scaled(&mut self, other: &CountMinSketch, alpha: f64) {
        assert!(
            Arc::ptr_eq(&self.hasher, &other.hasher) || self.hasher == other.hasher,
            "sketches use different hash functions"
        );
        for (c, &o) in self.cells.iter_mut().zip(&other.cells) {
            *c += alpha * o;
        }
    }
}

pub struct SketchKernel<'a> {
    graph: &'a Graph,
    seeds: &'a SeedLabels,
    rule: UpdateRule,
    k: usize,
    hasher: Arc<SketchHasher>,
    prior: CountMinSketch,
}

impl<'a> SketchKernel<'a> {
    pub fn new(graph: &'a Graph, seeds: &'a SeedLabels, params: &Hyperparams, width: usize, depth: usize) -> Self {
        let m = seeds.label_count();
        let hasher = Arc::new(SketchHasher::new(width, depth, params.rng_seed));
        let mut prior = CountMinSketch::new(hasher.clone());
        for l in 0..m as LabelIndex {
            prior.update(l, 1.0 / m as f64);
        }
        SketchKernel {
            graph,
            seeds,
            rule: params.update_rule(m),
            k: params.k,
            hasher,
            prior,
        }
    }

    pub fn hasher(&self) -> &Arc<SketchHasher> {
        &self.hasher
    }

    fn seed_sketch(&self, v: NodeIndex) -> CountMinSketch {
        let mut sketch = CountMinSketch::new(self.hasher.clone());
        for &(l, y) in self.seeds.seed(v) {
            sketch.update(l, y);
        }
        sketch
    }
}

impl UpdateKernel for SketchKernel<'_> {
    type Message = CountMinSketch;

    fn initial(&self, v: NodeIndex) -> CountMinSketch {
        if self.seeds.is_seed(v) {
            self.seed_sketch(v)
        } else {
            self.prior.clone()
        }
    }

    fn update(&self, v: NodeIndex, inbox: &[Inbound<'_, CountMinSketch>]) -> CountMinSketch {
        let mut sketch = CountMinSketch::new(self.hasher.clone());
        for msg in inbox {
            sketch.add_scaled(msg.message, msg.weight);
        }
        let seed = self.seed_sketch(v);
        let normalizer = self.rule.normalizer(self.seeds.is_seed(v), self.graph.weighted_degree(v));
        assert!(normalizer > 0.0, "zero normalizer at node {v}");
        for ((cell, &y), &u) in sketch.cells.iter_mut().zip(&seed.cells).zip(&self.prior.cells) {
            *cell = self.rule.value(y, *cell, u, normalizer);
        }
        sketch
    }

    fn stored_entries(&self, message: &CountMinSketch) -> usize {
        message.cells.len()
    }

    /// Estimates every label and keeps the best `k`.
    fn output(&self, message: &CountMinSketch) -> SparseLabelDist {
        let m = self.seeds.label_count();
        let scores = (0..m as LabelIndex).map(|l| (l, message.estimate(l))).collect();
        SparseLabelDist::from_scores(scores, m, self.k)
    }
}

pub fn run_cm_sketch(graph: &Graph, seeds: &SeedLabels, params: &Hyperparams, width: usize, depth: usize) -> Propagation {
    let kernel = SketchKernel::new(graph, seeds, params, width, depth);
    propagate_with(&kernel, graph, params.iterations)
}
