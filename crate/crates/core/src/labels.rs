//! Seed labels and the two label-distribution representations.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeIndex};

pub type LabelIndex = u32;

/// Tolerance on the stored mass of a sparse distribution.
pub const MASS_EPSILON: f64 = 1e-9;

/// Orders `(label, weight)` pairs by weight descending, label ascending.
pub fn by_weight_desc(a: &(LabelIndex, f64), b: &(LabelIndex, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Gold label distributions for the seed nodes, plus the label vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedLabels {
    label_ids: Vec<String>,
    label_index: HashMap<String, LabelIndex>,
    /// Per node, `(label, weight)` sorted by label; empty for unlabeled nodes.
    entries: Vec<Vec<(LabelIndex, f64)>>,
}

impl SeedLabels {
    /// Builds seeds from raw `(node, label, weight)` assignments. The label
    /// vocabulary is sorted lexicographically; each node's weights are summed
    /// per label and normalized to 1.
    pub fn from_assignments<S: AsRef<str>>(
        node_count: usize,
        vocabulary: impl IntoIterator<Item = S>,
        assignments: &[(NodeIndex, String, f64)],
    ) -> Self {
        let mut label_ids: Vec<String> = vocabulary.into_iter().map(|s| s.as_ref().to_string()).collect();
        label_ids.extend(assignments.iter().map(|a| a.1.clone()));
        label_ids.sort();
        label_ids.dedup();
        let label_index: HashMap<String, LabelIndex> = label_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as LabelIndex))
            .collect();

        let mut per_node: Vec<BTreeMap<LabelIndex, f64>> = vec![BTreeMap::new(); node_count];
        for (node, label, weight) in assignments {
            *per_node[*node].entry(label_index[label]).or_insert(0.0) += weight;
        }
        let entries = per_node
            .into_iter()
            .map(|labels| {
                let total: f64 = labels.values().sum();
                labels.into_iter().map(|(l, w)| (l, w / total)).collect()
            })
            .collect();
        SeedLabels {
            label_ids,
            label_index,
            entries,
        }
    }

    /// Keeps only the seeds of `nodes`; the label vocabulary is unchanged.
    pub fn restrict(&self, nodes: &[NodeIndex]) -> SeedLabels {
        let mut entries = vec![Vec::new(); self.entries.len()];
        for &v in nodes {
            entries[v] = self.entries[v].clone();
        }
        SeedLabels {
            label_ids: self.label_ids.clone(),
            label_index: self.label_index.clone(),
            entries,
        }
    }

    /// Number of distinct labels `m`.
    pub fn label_count(&self) -> usize {
        self.label_ids.len()
    }

    pub fn node_count(&self) -> usize {
        self.entries.len()
    }

    pub fn label_id(&self, l: LabelIndex) -> &str {
        &self.label_ids[l as usize]
    }

    pub fn label_ids(&self) -> &[String] {
        &self.label_ids
    }

    pub fn label_index(&self, id: &str) -> Option<LabelIndex> {
        self.label_index.get(id).copied()
    }

    pub fn seed(&self, v: NodeIndex) -> &[(LabelIndex, f64)] {
        &self.entries[v]
    }

    pub fn is_seed(&self, v: NodeIndex) -> bool {
        !self.entries[v].is_empty()
    }

    pub fn seed_weight(&self, v: NodeIndex, l: LabelIndex) -> f64 {
        self.entries[v]
            .binary_search_by_key(&l, |&(x, _)| x)
            .map(|i| self.entries[v][i].1)
            .unwrap_or(0.0)
    }

    pub fn seed_nodes(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        (0..self.entries.len()).filter(|&v| self.is_seed(v))
    }
}

/// Loads `node<TAB>label[<TAB>weight]` lines against an existing graph.
pub fn load_seeds(path: impl AsRef<Path>, graph: &Graph) -> Result<SeedLabels> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_seeds(BufReader::new(file), path, graph)
}

pub fn read_seeds(reader: impl BufRead, path: &Path, graph: &Graph) -> Result<SeedLabels> {
    read_assignments(reader, path, graph, false)
}

/// Like [`load_seeds`], but nodes missing from the graph are skipped with a
/// warning. Gold files may name nodes that have no edges.
pub fn load_gold(path: impl AsRef<Path>, graph: &Graph) -> Result<SeedLabels> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_assignments(BufReader::new(file), path, graph, true)
}

fn read_assignments(reader: impl BufRead, path: &Path, graph: &Graph, skip_unknown: bool) -> Result<SeedLabels> {
    let mut assignments = Vec::new();
    let mut skipped = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let (node, label, weight) = match fields.as_slice() {
            [node, label] => (*node, *label, 1.0),
            [node, label, w] => {
                let w: f64 = w
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, format!("bad weight `{w}`")))?;
                (*node, *label, w)
            }
            _ => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
                ))
            }
        };
        if label.is_empty() {
            return Err(Error::parse(path, lineno, "empty label id"));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::parse(path, lineno, format!("non-positive weight {weight}")));
        }
        match graph.index_of(node) {
            Some(v) => assignments.push((v, label.to_string(), weight)),
            None if skip_unknown => skipped += 1,
            None => return Err(Error::parse(path, lineno, format!("unknown node `{node}`"))),
        }
    }
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} labels on nodes absent from the graph", path.display());
    }
    Ok(SeedLabels::from_assignments(
        graph.node_count(),
        std::iter::empty::<&str>(),
        &assignments,
    ))
}

/// A full length-`m` label distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLabelDist {
    pub weights: Vec<f64>,
}

impl DenseLabelDist {
    pub fn uniform(m: usize) -> Self {
        DenseLabelDist {
            weights: vec![1.0 / m as f64; m],
        }
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn normalize(&mut self) {
        let total = self.sum();
        if total > 0.0 {
            self.weights.iter_mut().for_each(|w| *w /= total);
        }
    }

    /// Nonzero entries as a sparse distribution with no residual.
    pub fn to_sparse(&self) -> SparseLabelDist {
        sparse_from_row(&self.weights)
    }
}

pub(crate) fn sparse_from_row(row: &[f64]) -> SparseLabelDist {
    let mut entries: Vec<(LabelIndex, f64)> = row
        .iter()
        .enumerate()
        .filter(|(_, &w)| w != 0.0)
        .map(|(l, &w)| (l as LabelIndex, w))
        .collect();
    entries.sort_by(by_weight_desc);
    let stored: f64 = entries.iter().map(|e| e.1).sum();
    let absent = row.len() - entries.len();
    let residual = if absent > 0 {
        ((1.0 - stored) / absent as f64).max(0.0)
    } else {
        0.0
    };
    SparseLabelDist { entries, residual }
}

/// Top-k label entries plus the average mass `residual` of every label that
/// is not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseLabelDist {
    entries: Vec<(LabelIndex, f64)>,
    residual: f64,
}

impl SparseLabelDist {
    /// No stored entries; all mass spread uniformly through the residual.
    pub fn uniform(m: usize) -> Self {
        SparseLabelDist {
            entries: Vec::new(),
            residual: if m > 0 { 1.0 / m as f64 } else { 0.0 },
        }
    }

    /// Stores `entries` as given (re-sorted) with an explicit residual.
    pub fn with_residual(mut entries: Vec<(LabelIndex, f64)>, residual: f64) -> Self {
        entries.sort_by(by_weight_desc);
        SparseLabelDist { entries, residual }
    }

    /// Ranks `scores`, keeps the best `k`, and derives the residual over the
    /// `m - stored` labels left out. If the kept mass exceeds one it is scaled
    /// back to one and the residual is zero.
    pub fn from_scores(mut scores: Vec<(LabelIndex, f64)>, m: usize, k: usize) -> Self {
        scores.sort_by(by_weight_desc);
        scores.truncate(k);
        let stored: f64 = scores.iter().map(|e| e.1).sum();
        if stored > 1.0 {
            scores.iter_mut().for_each(|e| e.1 /= stored);
        }
        let absent = m.saturating_sub(scores.len());
        let residual = if absent > 0 && stored < 1.0 {
            ((1.0 - stored) / absent as f64).max(0.0)
        } else {
            0.0
        };
        SparseLabelDist {
            entries: scores,
            residual,
        }
    }

    /// Entries sorted by weight descending, label ascending.
    pub fn entries(&self) -> &[(LabelIndex, f64)] {
        &self.entries
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stored_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn stored(&self, l: LabelIndex) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == l).map(|e| e.1)
    }

    /// Weight of `l`: the stored value, else the residual.
    pub fn weight(&self, l: LabelIndex) -> f64 {
        self.stored(l).unwrap_or(self.residual)
    }

    pub fn ranked_labels(&self) -> impl Iterator<Item = LabelIndex> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn densify(&self, m: usize) -> Vec<f64> {
        let mut row = vec![self.residual; m];
        for &(l, w) in &self.entries {
            row[l as usize] = w;
        }
        row
    }
}

/// Writes `node<TAB>label<TAB>score` lines, nodes in id order, six decimals.
/// Nodes without stored entries are omitted.
pub fn write_output(
    dists: &[SparseLabelDist],
    graph: &Graph,
    seeds: &SeedLabels,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_output_to(dists, graph, seeds, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_output_to(
    dists: &[SparseLabelDist],
    graph: &Graph,
    seeds: &SeedLabels,
    out: &mut (impl Write + ?Sized),
) -> std::io::Result<()> {
    let mut order: Vec<NodeIndex> = (0..graph.node_count()).collect();
    order.sort_by(|&a, &b| graph.node_id(a).cmp(graph.node_id(b)));
    for v in order {
        let id = graph.node_id(v);
        for &(l, w) in dists[v].entries() {
            writeln!(out, "{id}\t{}\t{w:.6}", seeds.label_id(l))?;
        }
    }
    Ok(())
}
