//! Ranking metrics and the multi-round evaluation protocol.
//!
//! Metrics that need more of a ranking than a truncated label store keeps
//! are reported as `None` and printed as `NA`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeIndex};
use crate::labels::{LabelIndex, SeedLabels, SparseLabelDist};
use crate::params::{Hyperparams, Method};
use crate::propagate::propagate;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub seeds_per_label: usize,
    pub rounds: usize,
    pub ks: Vec<usize>,
    pub rng_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seeds_per_label: 10,
            rounds: 3,
            ks: vec![1, 5, 10, 20],
            rng_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds_per_label == 0 || self.rounds == 0 {
            return Err(Error::InvalidParams("seeds_per_label and rounds must be >= 1".into()));
        }
        if self.ks.contains(&0) {
            return Err(Error::InvalidParams("precision cutoffs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ranked label lists per node, with the capacity of the store they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    lists: Vec<Vec<LabelIndex>>,
    capacity: usize,
    label_count: usize,
}

impl Predictions {
    pub fn new(lists: Vec<Vec<LabelIndex>>, capacity: usize, label_count: usize) -> Self {
        Predictions {
            lists,
            capacity,
            label_count,
        }
    }

    pub fn from_dists(dists: &[SparseLabelDist], capacity: usize, label_count: usize) -> Self {
        let lists = dists.iter().map(|d| d.ranked_labels().collect()).collect();
        Predictions::new(lists, capacity, label_count)
    }

    /// True when the store could not hold every label.
    pub fn is_truncated(&self) -> bool {
        self.capacity < self.label_count
    }

    pub fn list(&self, v: NodeIndex) -> &[LabelIndex] {
        &self.lists[v]
    }
}

/// Gold label set of every node, sorted.
pub fn gold_sets(gold: &SeedLabels) -> Vec<Vec<LabelIndex>> {
    (0..gold.node_count())
        .map(|v| gold.seed(v).iter().map(|&(l, _)| l).collect())
        .collect()
}

fn check_query(gold: &[Vec<LabelIndex>], q: &[NodeIndex]) -> Result<()> {
    if q.is_empty() {
        return Err(Error::EmptyQuery);
    }
    if let Some(&v) = q.iter().find(|&&v| gold[v].is_empty()) {
        return Err(Error::InvalidParams(format!("test node #{v} has no gold label")));
    }
    Ok(())
}

/// 1-based rank of the best-ranked gold label.
fn best_rank(list: &[LabelIndex], gold: &[LabelIndex]) -> Option<usize> {
    list.iter().position(|l| gold.contains(l)).map(|i| i + 1)
}

/// Mean reciprocal rank over `q`; a node whose gold labels are all missing
/// from its list contributes 0. `None` when the lists are truncated.
pub fn mrr(pred: &Predictions, gold: &[Vec<LabelIndex>], q: &[NodeIndex]) -> Result<Option<f64>> {
    check_query(gold, q)?;
    if pred.is_truncated() {
        return Ok(None);
    }
    let total: f64 = q
        .iter()
        .map(|&v| best_rank(pred.list(v), &gold[v]).map_or(0.0, |r| 1.0 / r as f64))
        .sum();
    Ok(Some(total / q.len() as f64))
}

/// Fraction of `q` with a gold label among the top `k_cut` predictions.
/// `None` when `k_cut` exceeds a truncated store's capacity.
pub fn precision_at_k(pred: &Predictions, gold: &[Vec<LabelIndex>], q: &[NodeIndex], k_cut: usize) -> Result<Option<f64>> {
    if k_cut == 0 {
        return Err(Error::InvalidParams("precision cutoff must be >= 1".into()));
    }
    check_query(gold, q)?;
    if pred.is_truncated() && k_cut > pred.capacity {
        return Ok(None);
    }
    let hits = q
        .iter()
        .filter(|&&v| best_rank(pred.list(v), &gold[v]).is_some_and(|r| r <= k_cut))
        .count();
    Ok(Some(hits as f64 / q.len() as f64))
}

/// Labels a method can keep per node.
pub fn capacity(params: &Hyperparams, label_count: usize) -> usize {
    match params.method {
        Method::Exact => label_count,
        _ => params.k,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundResult {
    pub round: usize,
    pub mrr: Option<f64>,
    /// One value per cutoff in [`EvalConfig::ks`].
    pub precision: Vec<Option<f64>>,
    pub secs: f64,
    pub peak_entries: usize,
    pub max_entries_per_node: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodReport {
    pub method: String,
    pub rounds: Vec<RoundResult>,
    pub mrr: Option<f64>,
    pub precision: Vec<Option<f64>>,
    pub secs: f64,
    /// Largest total label-store size over all rounds.
    pub entries: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub ks: Vec<usize>,
    pub methods: Vec<MethodReport>,
    /// Seeds and test nodes per round.
    pub splits: Vec<(usize, usize)>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let values: Option<Vec<f64>> = values.collect();
    values.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Picks up to `per_label` seed nodes for every label, uniformly at random.
pub fn sample_seeds(gold: &SeedLabels, per_label: usize, rng: &mut ChaCha8Rng) -> Vec<NodeIndex> {
    let sets = gold_sets(gold);
    let mut chosen = BTreeSet::new();
    for l in 0..gold.label_count() as LabelIndex {
        let pool: Vec<NodeIndex> = (0..sets.len()).filter(|&v| sets[v].contains(&l)).collect();
        if pool.len() < per_label {
            log::warn!(
                "label `{}` has {} gold nodes, fewer than {per_label} seeds requested; using all",
                gold.label_id(l),
                pool.len()
            );
        }
        chosen.extend(pool.choose_multiple(rng, per_label).copied());
    }
    chosen.into_iter().collect()
}

/// Runs every method for `config.rounds` rounds. Round `r` samples seeds with
/// RNG seed `config.rng_seed + r`; all methods share that round's seeds.
pub fn run_protocol(graph: &Graph, gold: &SeedLabels, methods: &[Hyperparams], config: &EvalConfig) -> Result<Report> {
    config.validate()?;
    for params in methods {
        params.validate()?;
    }
    let sets = gold_sets(gold);
    let m = gold.label_count();
    let mut rounds: Vec<Vec<RoundResult>> = vec![Vec::new(); methods.len()];
    let mut splits = Vec::new();
    for round in 0..config.rounds {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(round as u64));
        let seed_nodes = sample_seeds(gold, config.seeds_per_label, &mut rng);
        let seeds = gold.restrict(&seed_nodes);
        let q: Vec<NodeIndex> = (0..sets.len())
            .filter(|&v| !sets[v].is_empty() && !seeds.is_seed(v))
            .collect();
        if q.is_empty() {
            return Err(Error::EmptyQuery);
        }
        splits.push((seed_nodes.len(), q.len()));
        for (params, results) in methods.iter().zip(&mut rounds) {
            let start = Instant::now();
            let run = propagate(graph, &seeds, params)?;
            let secs = start.elapsed().as_secs_f64();
            let pred = Predictions::from_dists(&run.dists, capacity(params, m), m);
            let result = RoundResult {
                round,
                mrr: mrr(&pred, &sets, &q)?,
                precision: config
                    .ks
                    .iter()
                    .map(|&k| precision_at_k(&pred, &sets, &q, k))
                    .collect::<Result<_>>()?,
                secs,
                peak_entries: run.stats.peak_entries,
                max_entries_per_node: run.stats.max_entries_per_node,
            };
            log::info!(
                "round={round} method={} seeds={} test={} p@1={:?} secs={secs:.3}",
                params.label(),
                seed_nodes.len(),
                q.len(),
                result.precision.first().copied().flatten()
            );
            results.push(result);
        }
    }
    let methods = methods
        .iter()
        .zip(rounds)
        .map(|(params, rounds)| MethodReport {
            method: params.label(),
            mrr: mean(rounds.iter().map(|r| r.mrr)),
            precision: (0..config.ks.len())
                .map(|i| mean(rounds.iter().map(|r| r.precision[i])))
                .collect(),
            secs: rounds.iter().map(|r| r.secs).sum::<f64>() / rounds.len() as f64,
            entries: rounds.iter().map(|r| r.peak_entries).max().unwrap_or(0),
            rounds,
        })
        .collect();
    Ok(Report {
        ks: config.ks.clone(),
        methods,
        splits,
    })
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

impl Report {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["method".to_string(), "mrr".to_string()];
        h.extend(self.ks.iter().map(|k| format!("p@{k}")));
        h.push("secs".into());
        h.push("entries".into());
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.methods
            .iter()
            .map(|m| {
                let mut row = vec![m.method.clone(), cell(m.mrr)];
                row.extend(m.precision.iter().map(|&p| cell(p)));
                row.push(format!("{:.3}", m.secs));
                row.push(m.entries.to_string());
                row
            })
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        std::iter::once(self.header())
            .chain(self.rows())
            .map(|r| r.join("\t") + "\n")
            .collect()
    }

    /// Left-aligned method column, right-aligned numbers.
    pub fn to_table(&self) -> String {
        let header = self.header();
        let rows = self.rows();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                std::iter::once(&header)
                    .chain(&rows)
                    .map(|r| r[c].len())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for row in std::iter::once(&header).chain(&rows) {
            let mut line = String::new();
            for (c, (text, &w)) in row.iter().zip(&widths).enumerate() {
                if c == 0 {
                    let _ = write!(line, "{text:<w$}");
                } else {
                    let _ = write!(line, "  {text:>w$}");
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}
