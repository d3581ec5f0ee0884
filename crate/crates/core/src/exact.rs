//! Dense propagation: every node holds all `m` label weights.
//!
//! This is the reference the approximate label stores are measured against.

use std::time::Instant;

use rayon::prelude::*;

use crate::graph::{Graph, NodeIndex};
use crate::kernel::{Inbound, Propagation, RunStats, UpdateKernel};
use crate::labels::{sparse_from_row, DenseLabelDist, SeedLabels, SparseLabelDist};
use crate::params::{Hyperparams, UpdateRule};

/// Dense `n x m` label weights for one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactState {
    label_count: usize,
    values: Vec<f64>,
    iteration: usize,
}

impl ExactState {
    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn node_count(&self) -> usize {
        self.values.len().checked_div(self.label_count).unwrap_or(0)
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn row(&self, v: NodeIndex) -> &[f64] {
        &self.values[v * self.label_count..(v + 1) * self.label_count]
    }

    pub fn dense(&self, v: NodeIndex) -> DenseLabelDist {
        DenseLabelDist {
            weights: self.row(v).to_vec(),
        }
    }

    pub fn to_sparse(&self) -> Vec<SparseLabelDist> {
        (0..self.node_count()).map(|v| sparse_from_row(self.row(v))).collect()
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.label_count.max(1))
    }

    /// Largest absolute entry-wise difference between two states.
    pub fn max_abs_change(&self, other: &ExactState) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Seed rows take their normalized seed distribution, all other rows are
/// uniform.
pub fn initialize(graph: &Graph, seeds: &SeedLabels) -> ExactState {
    let m = seeds.label_count();
    let n = graph.node_count();
    let mut values = vec![0.0; n * m];
    for (v, row) in values.chunks_mut(m.max(1)).enumerate().take(n) {
        fill_initial_row(seeds, v, row);
    }
    ExactState {
        label_count: m,
        values,
        iteration: 0,
    }
}

fn fill_initial_row(seeds: &SeedLabels, v: NodeIndex, row: &mut [f64]) {
    if seeds.is_seed(v) {
        row.fill(0.0);
        for &(l, y) in seeds.seed(v) {
            row[l as usize] = y;
        }
    } else {
        row.fill(1.0 / row.len() as f64);
    }
}

/// Computes one node's new row from its neighbors' previous rows.
fn update_row<'a>(
    rule: &UpdateRule,
    seeds: &SeedLabels,
    v: NodeIndex,
    weighted_degree: f64,
    neighbors: impl Iterator<Item = (f64, &'a [f64])>,
    out: &mut [f64],
) {
    out.fill(0.0);
    for (w, row) in neighbors {
        for (acc, &y) in out.iter_mut().zip(row) {
            *acc += w * y;
        }
    }
    let normalizer = rule.normalizer(seeds.is_seed(v), weighted_degree);
    assert!(normalizer > 0.0, "zero normalizer at node {v}");
    let mut seed = seeds.seed(v).iter().peekable();
    for (l, acc) in out.iter_mut().enumerate() {
        let y = match seed.peek() {
            Some(&&(sl, y)) if sl as usize == l => {
                seed.next();
                y
            }
            _ => 0.0,
        };
        *acc = rule.value(y, *acc, rule.prior, normalizer);
    }
}

/// One Jacobi step: every row is recomputed from the previous snapshot only.
pub fn jacobi_update(state: &ExactState, graph: &Graph, seeds: &SeedLabels, params: &Hyperparams) -> ExactState {
    let m = state.label_count;
    let rule = params.update_rule(m);
    let mut values = vec![0.0; state.values.len()];
    if m > 0 {
        values.par_chunks_mut(m).enumerate().for_each(|(v, out)| {
            let neighbors = graph.neighbors(v).iter().map(|&(u, w)| (w, state.row(u)));
            update_row(&rule, seeds, v, graph.weighted_degree(v), neighbors, out);
        });
    }
    ExactState {
        label_count: m,
        values,
        iteration: state.iteration + 1,
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The convex objective minimized by the update. The smoothness term sums
/// over every `(v, u)` with `u` a neighbor of `v`, so each undirected edge is
/// counted once from each side.
pub fn objective(state: &ExactState, graph: &Graph, seeds: &SeedLabels, params: &Hyperparams) -> f64 {
    let m = state.label_count;
    if m == 0 {
        return 0.0;
    }
    let uniform = vec![1.0 / m as f64; m];
    let mut gold = vec![0.0; m];
    let mut seed_term = 0.0;
    for v in seeds.seed_nodes() {
        fill_initial_row(seeds, v, &mut gold);
        seed_term += squared_distance(state.row(v), &gold);
    }
    let smooth_term: f64 = (0..graph.node_count())
        .into_par_iter()
        .map(|v| {
            graph
                .neighbors(v)
                .iter()
                .map(|&(u, w)| w * squared_distance(state.row(v), state.row(u)))
                .sum::<f64>()
        })
        .sum();
    let prior_term: f64 = state.rows().map(|r| squared_distance(r, &uniform)).sum();
    params.mu1 * seed_term + params.mu2 * smooth_term + params.mu3 * prior_term
}

#[derive(Clone, Debug)]
pub struct ExactRun {
    pub state: ExactState,
    /// Objective after initialization, then after each iteration.
    pub objectives: Vec<f64>,
    pub stats: RunStats,
}

/// Runs `params.iterations` Jacobi steps, or fewer when a tolerance is set
/// and reached.
pub fn run_exact(graph: &Graph, seeds: &SeedLabels, params: &Hyperparams) -> ExactRun {
    let m = seeds.label_count();
    let n = graph.node_count();
    let mut state = initialize(graph, seeds);
    let mut objectives = vec![objective(&state, graph, seeds, params)];
    let mut stats = RunStats::default();
    stats.record_entries(std::iter::repeat_n(m, n));
    for i in 0..params.iterations {
        let start = Instant::now();
        let next = jacobi_update(&state, graph, seeds, params);
        stats.iteration_secs.push(start.elapsed().as_secs_f64());
        stats.messages.push(2 * graph.edge_count());
        stats.iterations += 1;
        stats.record_entries(std::iter::repeat_n(m, n));
        let change = next.max_abs_change(&state);
        state = next;
        objectives.push(objective(&state, graph, seeds, params));
        log::debug!("exact iteration={} objective={:.9} change={:.3e}", i + 1, objectives[i + 1], change);
        if params.tolerance.is_some_and(|tol| change < tol) {
            break;
        }
    }
    ExactRun {
        state,
        objectives,
        stats,
    }
}

pub fn propagate_exact(graph: &Graph, seeds: &SeedLabels, params: &Hyperparams) -> Propagation {
    let run = run_exact(graph, seeds, params);
    Propagation {
        dists: run.state.to_sparse(),
        stats: run.stats,
        objectives: run.objectives,
    }
}

/// Dense rows as messages, for the partitioned engine.
pub struct ExactKernel<'a> {
    graph: &'a Graph,
    seeds: &'a SeedLabels,
    rule: UpdateRule,
}

impl<'a> ExactKernel<'a> {
    pub fn new(graph: &'a Graph, seeds: &'a SeedLabels, params: &Hyperparams) -> Self {
        ExactKernel {
            graph,
            seeds,
            rule: params.update_rule(seeds.label_count()),
        }
    }
}

impl UpdateKernel for ExactKernel<'_> {
    type Message = Vec<f64>;

    fn initial(&self, v: NodeIndex) -> Vec<f64> {
        let mut row = vec![0.0; self.seeds.label_count()];
        fill_initial_row(self.seeds, v, &mut row);
        row
    }

    fn update(&self, v: NodeIndex, inbox: &[Inbound<'_, Vec<f64>>]) -> Vec<f64> {
        let mut row = vec![0.0; self.seeds.label_count()];
        let neighbors = inbox.iter().map(|msg| (msg.weight, msg.message.as_slice()));
        update_row(&self.rule, self.seeds, v, self.graph.weighted_degree(v), neighbors, &mut row);
        row
    }

    fn stored_entries(&self, message: &Vec<f64>) -> usize {
        message.len()
    }

    fn output(&self, message: &Vec<f64>) -> SparseLabelDist {
        sparse_from_row(message)
    }
}
