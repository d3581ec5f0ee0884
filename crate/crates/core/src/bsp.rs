//! Partitioned superstep engine.
//!
//! Vertices are split into `p` partitions by `index mod p`. Each superstep
//! has a send phase, in which every node posts its previous state to all of
//! its neighbors, and an update phase, in which every partition sorts its
//! inbox by `(target, source)` and runs the update kernel once per node. The
//! outboxes are handed over between the two phases, so a message sent in
//! superstep `i` is only ever read in superstep `i`'s update, never in the
//! send phase that produced it. Sorting by source restores the adjacency
//! order, so the result does not depend on `p` or on the worker count.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{FreqThreshKernel, SketchKernel};
use crate::exact::ExactKernel;
use crate::graph::{Graph, NodeIndex};
use crate::kernel::{Inbound, Propagation, RunStats, UpdateKernel};
use crate::labels::SeedLabels;
use crate::params::{Hyperparams, Method};
use crate::streaming::StreamingKernel;

pub struct Partition<M> {
    pub id: usize,
    nodes: Vec<NodeIndex>,
    states: Vec<Arc<M>>,
}

impl<M> Partition<M> {
    pub fn nodes(&self) -> &[NodeIndex] {
        &self.nodes
    }
}

/// One message in flight: the sender's state from the previous superstep.
struct Envelope<M> {
    target: NodeIndex,
    source: NodeIndex,
    weight: f64,
    payload: Arc<M>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperstepStats {
    pub superstep: usize,
    pub messages: usize,
    pub secs: f64,
}

#[derive(Clone, Debug)]
pub struct BspRun {
    pub propagation: Propagation,
    pub supersteps: Vec<SuperstepStats>,
}

pub fn partition_of(v: NodeIndex, partitions: usize) -> usize {
    v % partitions
}

fn build_partitions<K: UpdateKernel>(kernel: &K, graph: &Graph, p: usize) -> Vec<Partition<K::Message>> {
    (0..p)
        .into_par_iter()
        .map(|id| {
            let nodes: Vec<NodeIndex> = (id..graph.node_count()).step_by(p).collect();
            let states = nodes.iter().map(|&v| Arc::new(kernel.initial(v))).collect();
            Partition { id, nodes, states }
        })
        .collect()
}

fn send_phase<M: Send + Sync>(parts: &[Partition<M>], graph: &Graph, p: usize) -> Vec<Vec<Envelope<M>>> {
    let outboxes: Vec<Vec<Vec<Envelope<M>>>> = parts
        .par_iter()
        .map(|part| {
            let mut out: Vec<Vec<Envelope<M>>> = (0..p).map(|_| Vec::new()).collect();
            for (&v, state) in part.nodes.iter().zip(&part.states) {
                for &(u, w) in graph.neighbors(v) {
                    out[partition_of(u, p)].push(Envelope {
                        target: u,
                        source: v,
                        weight: w,
                        payload: Arc::clone(state),
                    });
                }
            }
            out
        })
        .collect();

    // Barrier: move every batch to the inbox of its destination partition.
    let mut inboxes: Vec<Vec<Envelope<M>>> = (0..p).map(|_| Vec::new()).collect();
    for out in outboxes {
        for (q, batch) in out.into_iter().enumerate() {
            inboxes[q].extend(batch);
        }
    }
    inboxes
}

fn update_partition<K: UpdateKernel>(kernel: &K, part: &mut Partition<K::Message>, mut inbox: Vec<Envelope<K::Message>>) {
    inbox.sort_unstable_by_key(|e| (e.target, e.source));
    let mut ranges = Vec::with_capacity(part.nodes.len());
    let mut cursor = 0;
    for &v in &part.nodes {
        let start = cursor;
        while cursor < inbox.len() && inbox[cursor].target == v {
            cursor += 1;
        }
        ranges.push(start..cursor);
    }
    debug_assert_eq!(cursor, inbox.len(), "message addressed to a foreign node");
    part.states = part
        .nodes
        .par_iter()
        .zip(ranges)
        .map(|(&v, range)| {
            let msgs: Vec<Inbound<'_, K::Message>> = inbox[range]
                .iter()
                .map(|e| Inbound {
                    source: e.source,
                    weight: e.weight,
                    message: &*e.payload,
                })
                .collect();
            Arc::new(kernel.update(v, &msgs))
        })
        .collect();
}

/// Runs `iterations` supersteps of `kernel` over `partitions` partitions.
pub fn run_bsp_kernel<K: UpdateKernel>(kernel: &K, graph: &Graph, iterations: usize, partitions: usize) -> BspRun {
    assert!(partitions >= 1, "need at least one partition");
    let p = partitions;
    let mut parts = build_partitions(kernel, graph, p);
    let mut stats = RunStats::default();
    let mut supersteps = Vec::with_capacity(iterations);
    let entries = |parts: &[Partition<K::Message>]| {
        parts
            .iter()
            .flat_map(|part| part.states.iter().map(|s| kernel.stored_entries(s)))
            .collect::<Vec<_>>()
    };
    stats.record_entries(entries(&parts).into_iter());

    for i in 1..=iterations {
        let start = Instant::now();
        let inboxes = send_phase(&parts, graph, p);
        let messages: usize = inboxes.iter().map(Vec::len).sum();
        parts
            .par_iter_mut()
            .zip(inboxes)
            .for_each(|(part, inbox)| update_partition(kernel, part, inbox));
        let secs = start.elapsed().as_secs_f64();
        log::info!("superstep={i} msgs={messages} secs={secs:.6}");
        supersteps.push(SuperstepStats {
            superstep: i,
            messages,
            secs,
        });
        stats.iteration_secs.push(secs);
        stats.messages.push(messages);
        stats.iterations += 1;
        stats.record_entries(entries(&parts).into_iter());
    }
    stats.peak_transient = kernel.transient_peak();

    let mut dists = vec![None; graph.node_count()];
    for part in &parts {
        for (&v, state) in part.nodes.iter().zip(&part.states) {
            dists[v] = Some(kernel.output(state));
        }
    }
    BspRun {
        propagation: Propagation {
            dists: dists.into_iter().map(|d| d.expect("every node has a partition")).collect(),
            stats,
            objectives: Vec::new(),
        },
        supersteps,
    }
}

/// Runs the method selected in `params` on the partitioned engine.
pub fn run_bsp(graph: &Graph, seeds: &SeedLabels, params: &Hyperparams, partitions: usize) -> BspRun {
    let iterations = params.iterations;
    match params.method {
        Method::Exact => run_bsp_kernel(&ExactKernel::new(graph, seeds, params), graph, iterations, partitions),
        Method::Streaming => run_bsp_kernel(&StreamingKernel::new(graph, seeds, params), graph, iterations, partitions),
        Method::FreqThresh => run_bsp_kernel(
            &FreqThreshKernel::new(graph, seeds, params, params.freq_threshold),
            graph,
            iterations,
            partitions,
        ),
        Method::CmSketch => run_bsp_kernel(
            &SketchKernel::new(graph, seeds, params, params.cm_width, params.cm_depth),
            graph,
            iterations,
            partitions,
        ),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartitionSummary {
    pub id: usize,
    pub nodes: usize,
    /// Edges with exactly one endpoint in this partition.
    pub cross_edges: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartitionStats {
    pub partitions: Vec<PartitionSummary>,
    /// Undirected edges whose endpoints live in different partitions.
    pub cut_edges: usize,
}

pub fn partition_stats(graph: &Graph, partitions: usize) -> PartitionStats {
    assert!(partitions >= 1, "need at least one partition");
    let mut summary: Vec<PartitionSummary> = (0..partitions)
        .map(|id| PartitionSummary {
            id,
            ..Default::default()
        })
        .collect();
    for v in 0..graph.node_count() {
        summary[partition_of(v, partitions)].nodes += 1;
    }
    let mut cut_edges = 0;
    for (u, v, _) in graph.edges() {
        let (pu, pv) = (partition_of(u, partitions), partition_of(v, partitions));
        if pu != pv {
            cut_edges += 1;
            summary[pu].cross_edges += 1;
            summary[pv].cross_edges += 1;
        }
    }
    PartitionStats {
        partitions: summary,
        cut_edges,
    }
}
