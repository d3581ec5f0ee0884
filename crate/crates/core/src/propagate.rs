use crate::baselines::{run_cm_sketch, run_freq_thresh};
use crate::error::Result;
use crate::exact::propagate_exact;
use crate::graph::Graph;
use crate::kernel::Propagation;
use crate::labels::SeedLabels;
use crate::params::{Hyperparams, Method};
use crate::streaming::run_streaming;

/// Validates `params` and runs the selected method on a single partition.
pub fn propagate(graph: &Graph, seeds: &SeedLabels, params: &Hyperparams) -> Result<Propagation> {
    params.validate()?;
    Ok(match params.method {
        Method::Exact => propagate_exact(graph, seeds, params),
        Method::Streaming => run_streaming(graph, seeds, params),
        Method::FreqThresh => run_freq_thresh(graph, seeds, params, params.freq_threshold),
        Method::CmSketch => run_cm_sketch(graph, seeds, params, params.cm_width, params.cm_depth),
    })
}
