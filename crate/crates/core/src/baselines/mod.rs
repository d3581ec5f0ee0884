//! Bounded-memory label stores used as points of comparison for the
//! streaming tuple list.

pub mod freq;
pub mod sketch;

pub use freq::{run_freq_thresh, FreqThreshKernel};
pub use sketch::{run_cm_sketch, CountMinSketch, SketchHasher, SketchKernel};
