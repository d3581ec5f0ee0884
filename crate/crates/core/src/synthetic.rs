//! Planted-partition graph generator.
//!
//! `clusters` blocks of `nodes_per_cluster` nodes. Each pair inside a block is
//! joined with probability `intra`, each pair across blocks with probability
//! `inter`. A node's gold label is its block. Pair sampling skips ahead
//! geometrically, so the cost is linear in nodes plus edges.

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder, NodeIndex};
use crate::labels::SeedLabels;

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedPartition {
    pub clusters: usize,
    pub nodes_per_cluster: usize,
    pub intra: f64,
    pub inter: f64,
    pub seeds_per_cluster: usize,
    pub rng_seed: u64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        PlantedPartition {
            clusters: 2,
            nodes_per_cluster: 50,
            intra: 0.3,
            inter: 0.01,
            seeds_per_cluster: 10,
            rng_seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub graph: Graph,
    pub gold: SeedLabels,
    /// Seed nodes, `seeds_per_cluster` per cluster drawn from non-isolated nodes.
    pub seed_nodes: Vec<NodeIndex>,
}

impl SyntheticDataset {
    pub fn seeds(&self) -> SeedLabels {
        self.gold.restrict(&self.seed_nodes)
    }

    pub fn cluster_of(&self, v: NodeIndex) -> usize {
        self.gold.seed(v)[0].0 as usize
    }

    /// Writes `graph.tsv`, `gold.tsv` and `seeds.tsv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.graph.write_tsv(dir.join("graph.tsv"))?;
        let labels = |nodes: &mut dyn Iterator<Item = NodeIndex>| -> String {
            nodes
                .map(|v| format!("{}\t{}\n", self.graph.node_id(v), self.gold.label_id(self.gold.seed(v)[0].0)))
                .collect()
        };
        let gold = labels(&mut (0..self.graph.node_count()));
        let seeds = labels(&mut self.seed_nodes.iter().copied());
        for (name, text) in [("gold.tsv", gold), ("seeds.tsv", seeds)] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn digits(n: usize) -> usize {
    n.max(1).ilog10() as usize + 1
}

/// Calls `f` with every index in `0..total` kept independently with probability `p`, in increasing order.
fn bernoulli_indices(rng: &mut ChaCha8Rng, total: u64, p: f64, mut f: impl FnMut(u64)) {
    if p <= 0.0 || total == 0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(f);
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut next: u64 = 0;
    loop {
        let u: f64 = rng.random();
        let skip = ((1.0 - u).ln() / log_q).floor();
        if skip >= (total - next) as f64 {
            return;
        }
        next += skip as u64;
        f(next);
        next += 1;
        if next >= total {
            return;
        }
    }
}

pub fn generate(config: &PlantedPartition) -> Result<SyntheticDataset> {
    let PlantedPartition {
        clusters: c,
        nodes_per_cluster: q,
        intra,
        inter,
        ..
    } = *config;
    for (name, p) in [("intra", intra), ("inter", inter)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParams(format!("{name} probability must be in [0, 1], got {p}")));
        }
    }
    if c == 0 || q == 0 {
        return Err(Error::InvalidParams("clusters and nodes per cluster must be >= 1".into()));
    }
    let n = c * q;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut builder = GraphBuilder::new();
    let width = digits(n - 1);
    for v in 0..n {
        builder.add_node(&format!("v{v:0width$}"));
    }

    for a in 0..c {
        let base = a * q;
        let (mut row, mut row_start) = (0usize, 0u64);
        bernoulli_indices(&mut rng, (q * (q - 1) / 2) as u64, intra, |t| {
            while t >= row_start + (q - 1 - row) as u64 {
                row_start += (q - 1 - row) as u64;
                row += 1;
            }
            let col = row + 1 + (t - row_start) as usize;
            builder.add_edge(base + row, base + col, 1.0);
        });
        for b in a + 1..c {
            bernoulli_indices(&mut rng, (q * q) as u64, inter, |t| {
                let (i, j) = ((t / q as u64) as usize, (t % q as u64) as usize);
                builder.add_edge(base + i, b * q + j, 1.0);
            });
        }
    }
    let graph = builder.build();

    let label_width = digits(c - 1);
    let label = |a: usize| format!("C{a:0label_width$}");
    let assignments: Vec<_> = (0..n).map(|v| (v, label(v / q), 1.0)).collect();
    let gold = SeedLabels::from_assignments(n, std::iter::empty::<&str>(), &assignments);

    let mut seed_nodes = Vec::new();
    for a in 0..c {
        let pool: Vec<NodeIndex> = (a * q..(a + 1) * q).filter(|&v| graph.degree(v) > 0).collect();
        seed_nodes.extend(pool.choose_multiple(&mut rng, config.seeds_per_cluster).copied());
    }
    seed_nodes.sort_unstable();
    Ok(SyntheticDataset {
        graph,
        gold,
        seed_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(c: usize, q: usize, intra: f64, inter: f64) -> PlantedPartition {
        PlantedPartition {
            clusters: c,
            nodes_per_cluster: q,
            intra,
            inter,
            seeds_per_cluster: 3,
            rng_seed: 5,
        }
    }

    fn components(g: &Graph) -> usize {
        let mut seen = vec![false; g.node_count()];
        let mut count = 0;
        for s in 0..g.node_count() {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                for &(u, _) in g.neighbors(v) {
                    if !std::mem::replace(&mut seen[u], true) {
                        stack.push(u);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn two_clusters_sparse_cut() {
        let d = generate(&config(2, 50, 0.3, 0.01)).unwrap();
        let g = &d.graph;
        assert_eq!(g.node_count(), 100);
        assert_eq!(components(g), 1);
        let cut = g.edges().filter(|&(u, v, _)| d.cluster_of(u) != d.cluster_of(v)).count();
        let intra = g.edge_count() - cut;
        // expectations: 2 * 1225 * 0.3 = 735 intra, 2500 * 0.01 = 25 cut
        assert!((600..870).contains(&intra), "intra {intra}");
        assert!((8..50).contains(&cut), "cut {cut}");
        assert_eq!(d.seed_nodes.len(), 6);
    }

    #[test]
    fn edge_frequency_matches_probability() {
        let d = generate(&config(1, 400, 0.05, 0.0)).unwrap();
        let pairs = 400.0 * 399.0 / 2.0;
        let rate = d.graph.edge_count() as f64 / pairs;
        assert!((rate - 0.05).abs() < 0.005, "rate {rate}");
    }

    #[test]
    fn no_inter_edges_disconnects_clusters() {
        let d = generate(&config(3, 30, 0.5, 0.0)).unwrap();
        assert!(d.graph.edges().all(|(u, v, _)| d.cluster_of(u) == d.cluster_of(v)));
        assert_eq!(components(&d.graph), 3);
    }

    #[test]
    fn single_cluster_has_one_label() {
        let d = generate(&config(1, 20, 0.5, 0.5)).unwrap();
        assert_eq!(d.gold.label_count(), 1);
        assert_eq!(d.gold.label_id(0), "C0");
    }

    #[test]
    fn complete_blocks_at_probability_one() {
        let d = generate(&config(2, 4, 1.0, 1.0)).unwrap();
        assert_eq!(d.graph.edge_count(), 28);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate(&config(3, 40, 0.2, 0.02)).unwrap();
        let b = generate(&config(3, 40, 0.2, 0.02)).unwrap();
        let mut ta = Vec::new();
        let mut tb = Vec::new();
        a.graph.write_tsv_to(&mut ta).unwrap();
        b.graph.write_tsv_to(&mut tb).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a.seed_nodes, b.seed_nodes);
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(generate(&config(2, 5, 1.5, 0.0)).is_err());
        assert!(generate(&config(2, 5, 0.5, -0.1)).is_err());
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = generate(&config(2, 30, 0.3, 0.02)).unwrap();
        d.write(dir.path()).unwrap();
        let g = crate::graph::load_graph(dir.path().join("graph.tsv")).unwrap();
        assert_eq!(g.edge_count(), d.graph.edge_count());
        let seeds = crate::labels::load_seeds(dir.path().join("seeds.tsv"), &g).unwrap();
        assert_eq!(seeds.seed_nodes().count(), 6);
        let gold = crate::labels::load_gold(dir.path().join("gold.tsv"), &g).unwrap();
        assert_eq!(gold.label_count(), 2);
    }
}
