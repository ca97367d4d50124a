//! Seeded synthetic graph-classification datasets.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{featurize, FeatureMode, Graph, GraphDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Class 1: sparse random graph with a planted 5-7 clique. Class 0: sparse
    /// random graph with the same number of nodes and edges, whose extra edges
    /// form a dense complete bipartite block instead of a clique.
    PlantedClique,
    /// Class 0 sparse, class 1 denser Erdős–Rényi graphs.
    TwoDensity,
}

impl SyntheticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticKind::PlantedClique => "planted-clique",
            SyntheticKind::TwoDensity => "two-density",
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planted-clique" => Ok(SyntheticKind::PlantedClique),
            "two-density" => Ok(SyntheticKind::TwoDensity),
            other => Err(Error::Argument(format!("unknown synthetic kind `{other}`"))),
        }
    }
}

const MIN_NODES: usize = 20;
const MAX_NODES: usize = 30;
const BASE_DEGREE: f64 = 2.5;

type EdgeSet = BTreeSet<(usize, usize)>;

fn add(edges: &mut EdgeSet, u: usize, v: usize) {
    if u != v {
        edges.insert((u.min(v), u.max(v)));
    }
}

fn gnp(rng: &mut ChaCha8Rng, n: usize, p: f64) -> EdgeSet {
    let mut edges = EdgeSet::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.insert((u, v));
            }
        }
    }
    edges
}

/// Adds uniformly random non-edges, or removes random edges outside
/// `protected`, until `edges` has exactly `target` entries.
fn match_count(
    rng: &mut ChaCha8Rng,
    n: usize,
    edges: &mut EdgeSet,
    target: usize,
    protected: &EdgeSet,
) {
    while edges.len() < target {
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        add(edges, u, v);
    }
    if edges.len() > target {
        let mut removable: Vec<(usize, usize)> = edges.difference(protected).copied().collect();
        removable.shuffle(rng);
        for e in removable.into_iter().take(edges.len() - target) {
            edges.remove(&e);
        }
    }
}

fn planted_pair(rng: &mut ChaCha8Rng) -> (Graph, Graph) {
    let n = rng.random_range(MIN_NODES..=MAX_NODES);
    let p = BASE_DEGREE / (n - 1) as f64;
    let s = rng.random_range(5..=7);
    let nodes: Vec<usize> = (0..n).collect();

    let mut with_clique = gnp(rng, n, p);
    let members: Vec<usize> = nodes.choose_multiple(rng, s).copied().collect();
    let mut clique = EdgeSet::new();
    for (i, &u) in members.iter().enumerate() {
        for &v in &members[i + 1..] {
            add(&mut clique, u, v);
        }
    }
    with_clique.extend(&clique);

    // same edge budget spent on K_{a,b} with a*b close to the clique size
    let (a, b) = match s {
        5 => (2, 5),
        6 => (3, 5),
        _ => (3, 7),
    };
    let mut without = gnp(rng, n, p);
    let members: Vec<usize> = nodes.choose_multiple(rng, a + b).copied().collect();
    let mut block = EdgeSet::new();
    for &u in &members[..a] {
        for &v in &members[a..] {
            add(&mut block, u, v);
        }
    }
    without.extend(&block);
    match_count(rng, n, &mut without, with_clique.len(), &block);

    let g1 = Graph::new(n, with_clique).expect("valid by construction");
    let g0 = Graph::new(n, without).expect("valid by construction");
    (g0, g1)
}

fn density_pair(rng: &mut ChaCha8Rng) -> (Graph, Graph) {
    let n = rng.random_range(MIN_NODES..=MAX_NODES);
    let lo = gnp(rng, n, 2.0 / (n - 1) as f64);
    let hi = gnp(rng, n, 4.0 / (n - 1) as f64);
    (
        Graph::new(n, lo).expect("valid by construction"),
        Graph::new(n, hi).expect("valid by construction"),
    )
}

/// `n_graphs` graphs, half per class, in a seeded random order, with constant
/// node features.
pub fn generate_synthetic(kind: SyntheticKind, n_graphs: usize, seed: u64) -> Result<GraphDataset> {
    if n_graphs < 2 || !n_graphs.is_multiple_of(2) {
        return Err(Error::Argument(format!(
            "n_graphs = {n_graphs} must be even and >= 2"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(n_graphs);
    for _ in 0..n_graphs / 2 {
        let (g0, g1) = match kind {
            SyntheticKind::PlantedClique => planted_pair(&mut rng),
            SyntheticKind::TwoDensity => density_pair(&mut rng),
        };
        items.push((g0, 0));
        items.push((g1, 1));
    }
    items.shuffle(&mut rng);
    let (graphs, labels): (Vec<Graph>, Vec<i64>) = items.into_iter().unzip();
    let mut ds = GraphDataset::from_raw_labels(kind.as_str(), graphs, &labels)?;
    featurize(&mut ds, FeatureMode::Constant);
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohesion::core_numbers;
    use crate::substructure::count_cliques_per_node;

    #[test]
    fn planted_clique_classes() {
        let ds = generate_synthetic(SyntheticKind::PlantedClique, 100, 3).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.labels.iter().filter(|&&l| l == 1).count(), 50);
        for (g, &l) in ds.graphs.iter().zip(&ds.labels) {
            assert!(ds.label_map[l] == l as i64);
            if l == 1 {
                assert!(core_numbers(g).k_max >= 4);
                let c5 = count_cliques_per_node(g, &[5]);
                assert!(c5.matrix.iter().any(|&x| x > 0.0));
            }
            assert!(g.node_features.is_some());
        }
    }

    #[test]
    fn pairs_match_edge_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let (g0, g1) = planted_pair(&mut rng);
            assert_eq!(g0.node_count, g1.node_count);
            assert_eq!(g0.edge_count(), g1.edge_count());
        }
    }

    #[test]
    fn deterministic_and_small() {
        for kind in [SyntheticKind::PlantedClique, SyntheticKind::TwoDensity] {
            let a = generate_synthetic(kind, 10, 9).unwrap();
            let b = generate_synthetic(kind, 10, 9).unwrap();
            assert_eq!(a.graphs, b.graphs);
            assert_eq!(a.labels, b.labels);
        }
        let two = generate_synthetic(SyntheticKind::PlantedClique, 2, 1).unwrap();
        let mut l = two.labels.clone();
        l.sort_unstable();
        assert_eq!(l, vec![0, 1]);
        assert!(generate_synthetic(SyntheticKind::TwoDensity, 3, 0).is_err());
        assert!(generate_synthetic(SyntheticKind::TwoDensity, 0, 0).is_err());
    }
}
