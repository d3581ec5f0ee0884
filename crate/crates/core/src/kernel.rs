//! Per-node update kernels and the single-partition driver.

use std::time::Instant;

use rayon::prelude::*;

use crate::graph::{Graph, NodeIndex};
use crate::labels::SparseLabelDist;

/// One neighbor message as seen by the receiving node.
#[derive(Debug)]
pub struct Inbound<'a, M> {
    pub source: NodeIndex,
    pub weight: f64,
    pub message: &'a M,
}

/// A label store plus its Jacobi update. The message a node sends in
/// iteration `i` is exactly the state it computed in iteration `i - 1`.
pub trait UpdateKernel: Sync {
    type Message: Send + Sync;

    fn initial(&self, v: NodeIndex) -> Self::Message;

    /// Computes the new state of `v` from its inbox, ordered by source index.
    fn update(&self, v: NodeIndex, inbox: &[Inbound<'_, Self::Message>]) -> Self::Message;

    /// Label-store entries persisted for one node.
    fn stored_entries(&self, message: &Self::Message) -> usize;

    fn output(&self, message: &Self::Message) -> SparseLabelDist;

    /// Largest scratch structure seen while updating, if the kernel tracks it.
    fn transient_peak(&self) -> usize {
        0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunStats {
    pub iterations: usize,
    /// Largest per-node entry count over all nodes and all iterations.
    pub max_entries_per_node: usize,
    /// Total stored entries across nodes after the last iteration.
    pub final_entries: usize,
    /// Largest total over all iterations, including initialization.
    pub peak_entries: usize,
    pub peak_transient: usize,
    pub iteration_secs: Vec<f64>,
    pub messages: Vec<usize>,
}

impl RunStats {
    pub(crate) fn record_entries(&mut self, per_node: impl Iterator<Item = usize>) {
        let (mut total, mut max) = (0, 0);
        for e in per_node {
            total += e;
            max = max.max(e);
        }
        self.max_entries_per_node = self.max_entries_per_node.max(max);
        self.peak_entries = self.peak_entries.max(total);
        self.final_entries = total;
    }

    pub fn total_secs(&self) -> f64 {
        self.iteration_secs.iter().sum()
    }
}

/// Output of any propagation run.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub dists: Vec<SparseLabelDist>,
    pub stats: RunStats,
    /// Objective after initialization and after each iteration; filled only
    /// by the exact method.
    pub objectives: Vec<f64>,
}

/// Runs `iterations` Jacobi rounds over all nodes. Each node reads only the
/// previous snapshot, and its neighbors are visited in adjacency order.
pub fn run_kernel<K: UpdateKernel>(
    kernel: &K,
    graph: &Graph,
    iterations: usize,
) -> (Vec<K::Message>, RunStats) {
    let n = graph.node_count();
    let mut stats = RunStats::default();
    let mut states: Vec<K::Message> = (0..n).into_par_iter().map(|v| kernel.initial(v)).collect();
    stats.record_entries(states.iter().map(|s| kernel.stored_entries(s)));

    for _ in 0..iterations {
        let start = Instant::now();
        let next: Vec<K::Message> = (0..n)
            .into_par_iter()
            .map(|v| {
                let inbox: Vec<Inbound<'_, K::Message>> = graph
                    .neighbors(v)
                    .iter()
                    .map(|&(u, w)| Inbound {
                        source: u,
                        weight: w,
                        message: &states[u],
                    })
                    .collect();
                kernel.update(v, &inbox)
            })
            .collect();
        states = next;
        stats.iteration_secs.push(start.elapsed().as_secs_f64());
        stats.messages.push(2 * graph.edge_count());
        stats.iterations += 1;
        stats.record_entries(states.iter().map(|s| kernel.stored_entries(s)));
    }
    stats.peak_transient = kernel.transient_peak();
    (states, stats)
}

/// Runs a kernel and converts the final states to sparse distributions.
pub(crate) fn propagate_with<K: UpdateKernel>(kernel: &K, graph: &Graph, iterations: usize) -> Propagation {
    let (states, stats) = run_kernel(kernel, graph, iterations);
    Propagation {
        dists: states.iter().map(|s| kernel.output(s)).collect(),
        stats,
        objectives: Vec::new(),
    }
}
