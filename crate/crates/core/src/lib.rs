//! Graph-based semi-supervised label propagation.
//!
//! Labels spread from seed nodes over an undirected weighted graph by Jacobi
//! iteration on a convex objective that balances seed fidelity, neighbor
//! smoothness and a uniform prior. Alongside the dense reference update the
//! crate provides bounded-memory label stores (a streaming top-k tuple list,
//! frequency thresholding and count-min sketches), a partitioned
//! superstep engine, embedding-based graph augmentation with random
//! hyperplane LSH, and an MRR / precision@K evaluation harness.

pub mod augment;
pub mod baselines;
pub mod bsp;
pub mod error;
pub mod eval;
pub mod exact;
pub mod graph;
pub mod kernel;
pub mod labels;
pub mod params;
pub mod propagate;
pub mod streaming;
pub mod synthetic;

pub use bsp::{partition_stats, run_bsp, BspRun, PartitionStats};
pub use error::{Error, Result};
pub use graph::{load_graph, Graph, GraphBuilder, NodeIndex};
pub use kernel::{Propagation, RunStats};
pub use labels::{load_gold, load_seeds, write_output, DenseLabelDist, LabelIndex, SeedLabels, SparseLabelDist};
pub use params::{DeltaMode, Hyperparams, Method};
pub use propagate::propagate;
