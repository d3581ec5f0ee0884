use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which label store the propagation loop runs with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Dense length-m rows for every node.
    Exact,
    /// Top-k entries built by the streaming tuple list.
    Streaming,
    /// Full neighbor aggregation, thresholded and truncated to top-k.
    FreqThresh,
    /// One count-min sketch per node.
    CmSketch,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Exact,
        Method::Streaming,
        Method::FreqThresh,
        Method::CmSketch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Streaming => "streaming",
            Method::FreqThresh => "freq-thresh",
            Method::CmSketch => "cm-sketch",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown method `{s}`")))
    }
}

/// Residual used by the streaming tuple list for labels a neighbor did not send.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DeltaMode {
    /// Each neighbor's own residual mass.
    #[default]
    Adaptive,
    /// A fixed 1/m for every neighbor.
    Uniform,
}

impl FromStr for DeltaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(DeltaMode::Adaptive),
            "uniform" => Ok(DeltaMode::Uniform),
            _ => Err(Error::InvalidParams(format!("unknown delta mode `{s}`"))),
        }
    }
}

impl fmt::Display for DeltaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeltaMode::Adaptive => "adaptive",
            DeltaMode::Uniform => "uniform",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    /// Weight of the seed term.
    pub mu1: f64,
    /// Weight of the neighbor smoothness term.
    pub mu2: f64,
    /// Weight of the uniform prior term.
    pub mu3: f64,
    pub iterations: usize,
    /// Labels stored per node by the sparse methods.
    pub k: usize,
    pub method: Method,
    pub delta_mode: DeltaMode,
    pub freq_threshold: f64,
    pub cm_width: usize,
    pub cm_depth: usize,
    /// Early exit for the exact method once the largest change in any row
    /// entry drops below this value.
    pub tolerance: Option<f64>,
    pub rng_seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            mu1: 1.0,
            mu2: 0.01,
            mu3: 0.01,
            iterations: 10,
            k: 5,
            method: Method::Streaming,
            delta_mode: DeltaMode::Adaptive,
            freq_threshold: 0.001,
            cm_width: 109,
            cm_depth: 3,
            tolerance: None,
            rng_seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn with_method(method: Method) -> Self {
        Hyperparams {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        for mu in [self.mu1, self.mu2, self.mu3] {
            if !(mu >= 0.0 && mu.is_finite()) {
                return bad("mu1, mu2, mu3 must be finite and non-negative");
            }
        }
        if !(self.mu1 > 0.0 || self.mu3 > 0.0) {
            return bad("mu1 or mu3 must be positive");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.method == Method::FreqThresh && self.freq_threshold.is_nan() || self.freq_threshold <= 0.0 {
            return bad("freq threshold must be positive");
        }
        if self.method == Method::CmSketch && self.cm_width * self.cm_depth == 0 {
            return bad("count-min width and depth must be positive");
        }
        Ok(())
    }

    /// Short description used in reports, e.g. `streaming(k=5)`.
    pub fn label(&self) -> String {
        match self.method {
            Method::Exact => "exact".to_string(),
            Method::Streaming => format!("streaming(k={})", self.k),
            Method::FreqThresh => format!("freq-thresh(k={})", self.k),
            Method::CmSketch => format!("cm-sketch(w={},d={})", self.cm_width, self.cm_depth),
        }
    }

    pub(crate) fn update_rule(&self, m: usize) -> UpdateRule {
        UpdateRule {
            mu1: self.mu1,
            mu2: self.mu2,
            mu3: self.mu3,
            prior: 1.0 / m as f64,
        }
    }
}

/// The per-entry Jacobi update shared by every label store, so that all of
/// them perform the same floating-point operations on the same inputs.
#[derive(Clone, Copy, Debug)]
pub(crate) struct UpdateRule {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    /// `U_l = 1/m`.
    pub prior: f64,
}

impl UpdateRule {
    /// `mu1 * s_vv + mu2 * sum_u w_vu + mu3`.
    #[inline]
    pub fn normalizer(&self, is_seed: bool, weighted_degree: f64) -> f64 {
        let s = if is_seed { 1.0 } else { 0.0 };
        self.mu1 * s + self.mu2 * weighted_degree + self.mu3
    }

    /// New weight from the seed weight, the neighbor aggregate and the prior
    /// mass for one label.
    #[inline]
    pub fn value(&self, seed_weight: f64, aggregate: f64, prior: f64, normalizer: f64) -> f64 {
        (self.mu1 * seed_weight + self.mu2 * aggregate + self.mu3 * prior) / normalizer
    }
}
