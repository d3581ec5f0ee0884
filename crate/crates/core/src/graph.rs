//! Undirected weighted graph with a dense node index.
//!
//! Nodes are numbered in order of first appearance in the edge file. Each
//! adjacency list is sorted by neighbor index, which fixes the order in which
//! neighbor messages are consumed everywhere else in the crate.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub type NodeIndex = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    node_ids: Vec<String>,
    index: HashMap<String, NodeIndex>,
    adjacency: Vec<Vec<(NodeIndex, f64)>>,
    weighted_degree: Vec<f64>,
    edge_count: usize,
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: NodeIndex) -> &[(NodeIndex, f64)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: NodeIndex) -> usize {
        self.adjacency[v].len()
    }

    /// Sum of incident edge weights, accumulated in adjacency order.
    pub fn weighted_degree(&self, v: NodeIndex) -> f64 {
        self.weighted_degree[v]
    }

    pub fn node_id(&self, v: NodeIndex) -> &str {
        &self.node_ids[v]
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn index_of(&self, id: &str) -> Option<NodeIndex> {
        self.index.get(id).copied()
    }

    pub fn edge_weight(&self, u: NodeIndex, v: NodeIndex) -> Option<f64> {
        let adj = &self.adjacency[u];
        adj.binary_search_by_key(&v, |&(n, _)| n)
            .ok()
            .map(|pos| adj[pos].1)
    }

    /// Undirected edges as `(u, v, w)` with `u < v`, ordered by `(u, v)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeIndex, NodeIndex, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, adj)| {
            adj.iter()
                .filter(move |&&(v, _)| v > u)
                .map(move |&(v, w)| (u, v, w))
        })
    }

    /// Writes the edge list as `src<TAB>dst<TAB>weight`, one line per undirected
    /// edge, sorted by external ids. Weights use the shortest round-trip form.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_tsv_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_tsv_to(&self, out: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
        let mut lines: Vec<(&str, &str, f64)> = self
            .edges()
            .map(|(u, v, w)| {
                let (a, b) = (self.node_id(u), self.node_id(v));
                if a <= b {
                    (a, b, w)
                } else {
                    (b, a, w)
                }
            })
            .collect();
        lines.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        for (a, b, w) in lines {
            writeln!(out, "{a}\t{b}\t{w}")?;
        }
        Ok(())
    }
}

/// Accumulates nodes and edges before freezing them into a [`Graph`].
///
/// Repeated edges between the same pair, in either direction, sum their weights.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    node_ids: Vec<String>,
    index: HashMap<String, NodeIndex>,
    edges: BTreeMap<(NodeIndex, NodeIndex), f64>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: &str) -> NodeIndex {
        if let Some(&v) = self.index.get(id) {
            return v;
        }
        let v = self.node_ids.len();
        self.node_ids.push(id.to_string());
        self.index.insert(id.to_string(), v);
        v
    }

    /// Adds `w` to the undirected edge `{u, v}`. Panics on self-loops or
    /// negative weights; file loaders validate these before calling.
    pub fn add_edge(&mut self, u: NodeIndex, v: NodeIndex, w: f64) {
        assert!(u != v, "self-loop on node {u}");
        assert!(w >= 0.0 && w.is_finite(), "invalid edge weight {w}");
        let key = if u < v { (u, v) } else { (v, u) };
        *self.edges.entry(key).or_insert(0.0) += w;
    }

    /// Replaces the weight of `{u, v}`.
    pub fn set_edge(&mut self, u: NodeIndex, v: NodeIndex, w: f64) {
        assert!(u != v, "self-loop on node {u}");
        assert!(w >= 0.0 && w.is_finite(), "invalid edge weight {w}");
        let key = if u < v { (u, v) } else { (v, u) };
        self.edges.insert(key, w);
    }

    pub fn build(self) -> Graph {
        let n = self.node_ids.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut edge_count = 0;
        for (&(u, v), &w) in &self.edges {
            if w > 0.0 {
                adjacency[u].push((v, w));
                adjacency[v].push((u, w));
                edge_count += 1;
            }
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(n, _)| n);
        }
        let weighted_degree = adjacency
            .iter()
            .map(|adj| adj.iter().map(|&(_, w)| w).sum())
            .collect();
        Graph {
            node_ids: self.node_ids,
            index: self.index,
            adjacency,
            weighted_degree,
            edge_count,
        }
    }
}

impl From<&Graph> for GraphBuilder {
    fn from(graph: &Graph) -> Self {
        let mut builder = GraphBuilder {
            node_ids: graph.node_ids.clone(),
            index: graph.index.clone(),
            edges: BTreeMap::new(),
        };
        for (u, v, w) in graph.edges() {
            builder.edges.insert((u, v), w);
        }
        builder
    }
}

/// Loads an edge list: `src<TAB>dst[<TAB>weight]`, weight defaulting to 1.0.
/// Blank lines and lines starting with `#` are skipped.
pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_graph(BufReader::new(file), path)
}

pub fn read_graph(reader: impl BufRead, path: &Path) -> Result<Graph> {
    let mut builder = GraphBuilder::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let (src, dst, weight) = match fields.as_slice() {
            [src, dst] => (*src, *dst, 1.0),
            [src, dst, w] => {
                let w: f64 = w
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, format!("bad weight `{w}`")))?;
                (*src, *dst, w)
            }
            _ => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
                ))
            }
        };
        if src.is_empty() || dst.is_empty() {
            return Err(Error::parse(path, lineno, "empty node id"));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::parse(path, lineno, format!("negative or non-finite weight {weight}")));
        }
        if src == dst {
            return Err(Error::parse(path, lineno, format!("self-loop on `{src}`")));
        }
        let u = builder.add_node(src);
        let v = builder.add_node(dst);
        builder.add_edge(u, v, weight);
    }
    Ok(builder.build())
}
