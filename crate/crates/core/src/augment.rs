//! Embedding-driven graph augmentation.
//!
//! Node embeddings are composed from a word-vector table, L2-normalized, and
//! indexed with random-hyperplane LSH. Two nodes become a candidate pair when
//! their full `W`-bit signatures agree in at least one of `D` tables. Every
//! candidate is rescored with cosine similarity, and pairs at or above the
//! threshold gain an edge weighted by that similarity.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder, NodeIndex};

pub const DEFAULT_BRUTE_FORCE_CAP: usize = 10_000;

#[derive(Clone, Debug, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                token: token.to_string(),
                expected: self.dim,
                found: vector.len(),
            });
        }
        self.vectors.insert(token.to_string(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

/// Reads `token<TAB>v1,v2,...` lines. The first vector fixes the dimension.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), path)
}

pub fn read_embeddings(reader: impl BufRead, path: &Path) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((token, values)) = line.split_once('\t') else {
            return Err(Error::parse(path, lineno, "expected `token<TAB>v1,v2,...`"));
        };
        if token.is_empty() {
            return Err(Error::parse(path, lineno, "empty token"));
        }
        let vector = values
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(path, lineno, format!("bad vector component `{x}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        table
            .get_or_insert_with(|| EmbeddingTable::new(vector.len()))
            .insert(token, vector)?;
    }
    Ok(table.unwrap_or_default())
}

/// Whole string first, then the underscore-joined phrase, then the mean of
/// the space-separated tokens found in the table.
pub fn compose_node_embedding(node_text: &str, table: &EmbeddingTable) -> Option<Vec<f64>> {
    if let Some(v) = table.get(node_text) {
        return Some(v.to_vec());
    }
    if node_text.contains(' ') {
        if let Some(v) = table.get(&node_text.replace(' ', "_")) {
            return Some(v.to_vec());
        }
    }
    let mut sum = vec![0.0; table.dim()];
    let mut found = 0usize;
    for token in node_text.split(' ').filter(|t| !t.is_empty()) {
        if let Some(v) = table.get(token) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            found += 1;
        }
    }
    if found == 0 {
        log::warn!("no embedding for node `{node_text}`; excluded from augmentation");
        return None;
    }
    for s in &mut sum {
        *s /= found as f64;
    }
    Some(sum)
}

/// One optional embedding per node, composed from the node ids.
pub fn node_embeddings(graph: &Graph, table: &EmbeddingTable) -> Vec<Option<Vec<f64>>> {
    graph
        .node_ids()
        .par_iter()
        .map(|id| compose_node_embedding(id, table))
        .collect()
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > 0.0).then(|| v.iter().map(|x| x / norm).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks dimensions and returns `(node, unit vector)` for every usable node.
fn unit_vectors(embeddings: &[Option<Vec<f64>>]) -> Result<Vec<(NodeIndex, Vec<f64>)>> {
    let dim = embeddings.iter().flatten().map(Vec::len).next().unwrap_or(0);
    let mut out = Vec::new();
    for (v, e) in embeddings.iter().enumerate() {
        let Some(e) = e else { continue };
        if e.len() != dim {
            return Err(Error::DimensionMismatch {
                token: format!("node #{v}"),
                expected: dim,
                found: e.len(),
            });
        }
        match normalized(e) {
            Some(u) => out.push((v, u)),
            None => log::warn!("zero embedding for node #{v}; excluded from augmentation"),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct LshIndex {
    dim: usize,
    tables: usize,
    width: usize,
    /// `tables * width` unit hyperplanes, table-major.
    hyperplanes: Vec<Vec<f64>>,
    buckets: Vec<HashMap<u64, Vec<NodeIndex>>>,
}

impl LshIndex {
    /// Hyperplanes are drawn table by table from one stream, so the first
    /// `D` tables of an index with more tables are the same tables.
    pub fn new(dim: usize, tables: usize, width: usize, rng_seed: u64) -> Result<Self> {
        if tables == 0 || width == 0 || width > 64 {
            return Err(Error::InvalidParams(format!(
                "LSH needs tables >= 1 and 1 <= width <= 64, got {tables} x {width}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let hyperplanes = (0..tables * width)
            .map(|_| loop {
                let h: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                if let Some(u) = normalized(&h) {
                    break u;
                }
            })
            .collect();
        Ok(LshIndex {
            dim,
            tables,
            width,
            hyperplanes,
            buckets: vec![HashMap::new(); tables],
        })
    }

    pub fn tables(&self) -> usize {
        self.tables
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Bit `j` is set when `hyperplane(table, j) . x >= 0`.
    pub fn signature(&self, table: usize, x: &[f64]) -> u64 {
        debug_assert_eq!(x.len(), self.dim);
        let planes = &self.hyperplanes[table * self.width..(table + 1) * self.width];
        planes
            .iter()
            .enumerate()
            .fold(0u64, |sig, (j, h)| if dot(h, x) >= 0.0 { sig | (1 << j) } else { sig })
    }

    pub fn insert_all(&mut self, vectors: &[(NodeIndex, Vec<f64>)]) {
        let this = &*self;
        let buckets: Vec<HashMap<u64, Vec<NodeIndex>>> = (0..this.tables)
            .into_par_iter()
            .map(|t| {
                let mut table = this.buckets[t].clone();
                for (v, x) in vectors {
                    table.entry(this.signature(t, x)).or_default().push(*v);
                }
                table
            })
            .collect();
        self.buckets = buckets;
    }

    /// Pairs `(u, v)` with `u < v` sharing a bucket in some table.
    pub fn candidate_pairs(&self) -> BTreeSet<(NodeIndex, NodeIndex)> {
        let mut pairs = BTreeSet::new();
        for table in &self.buckets {
            for bucket in table.values() {
                for (i, &a) in bucket.iter().enumerate() {
                    for &b in &bucket[i + 1..] {
                        pairs.insert((a.min(b), a.max(b)));
                    }
                }
            }
        }
        pairs
    }
}

fn check_threshold(theta_sim: f64) -> Result<()> {
    if theta_sim > 0.0 && theta_sim <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("theta_sim must be in (0, 1], got {theta_sim}")))
    }
}

/// Candidate pairs from LSH, rescored, with cosine `>= theta_sim`. Sorted by pair.
pub fn lsh_pairs(
    embeddings: &[Option<Vec<f64>>],
    theta_sim: f64,
    tables: usize,
    width: usize,
    rng_seed: u64,
) -> Result<Vec<(NodeIndex, NodeIndex, f64)>> {
    check_threshold(theta_sim)?;
    let vectors = unit_vectors(embeddings)?;
    let dim = vectors.first().map_or(0, |(_, x)| x.len());
    let mut index = LshIndex::new(dim, tables, width, rng_seed)?;
    index.insert_all(&vectors);
    let candidates: Vec<_> = index.candidate_pairs().into_iter().collect();
    let unit: HashMap<NodeIndex, &[f64]> = vectors.iter().map(|(v, x)| (*v, x.as_slice())).collect();
    let pairs: Vec<_> = candidates
        .par_iter()
        .filter_map(|&(u, v)| {
            let cos = dot(unit[&u], unit[&v]).min(1.0);
            (cos >= theta_sim).then_some((u, v, cos))
        })
        .collect();
    log::info!(
        "lsh: {} vectors, {} candidates, {} pairs at theta={theta_sim}",
        vectors.len(),
        candidates.len(),
        pairs.len()
    );
    Ok(pairs)
}

/// Adds LSH-discovered similarity edges to a copy of `graph`. An existing
/// edge keeps the larger of its weight and the similarity.
pub fn augment(
    graph: &Graph,
    embeddings: &[Option<Vec<f64>>],
    theta_sim: f64,
    tables: usize,
    width: usize,
    rng_seed: u64,
) -> Result<Graph> {
    assert_eq!(embeddings.len(), graph.node_count(), "one embedding slot per node");
    let pairs = lsh_pairs(embeddings, theta_sim, tables, width, rng_seed)?;
    let mut builder = GraphBuilder::from(graph);
    for (u, v, cos) in pairs {
        let w = graph.edge_weight(u, v).map_or(cos, |w| w.max(cos));
        builder.set_edge(u, v, w);
    }
    Ok(builder.build())
}

/// All pairs with cosine `>= theta_sim`, by direct comparison.
pub fn brute_force_pairs(
    embeddings: &[Option<Vec<f64>>],
    theta_sim: f64,
    cap: usize,
) -> Result<Vec<(NodeIndex, NodeIndex, f64)>> {
    check_threshold(theta_sim)?;
    let count = embeddings.iter().flatten().count();
    if count > cap {
        return Err(Error::CapExceeded { cap, count });
    }
    let vectors = unit_vectors(embeddings)?;
    Ok(vectors
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, (u, x))| {
            vectors[i + 1..].iter().filter_map(move |(v, y)| {
                let cos = dot(x, y).min(1.0);
                (cos >= theta_sim).then_some((*u, *v, cos))
            })
        })
        .collect())
}
