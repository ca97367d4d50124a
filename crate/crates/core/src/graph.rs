//! Undirected simple graphs, labeled graph datasets, and the native text format.
//!
//! [`Graph`] is plain data so that malformed graphs can be represented and
//! diagnosed with [`validate_graph`]; [`Graph::new`] is the checked constructor.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub node_count: usize,
    /// Unordered pairs; stored as `(min, max)` by the checked constructors.
    pub edges: Vec<(usize, usize)>,
    pub edge_weights: Vec<f64>,
    /// One row per node.
    pub node_features: Option<DMatrix<f64>>,
}

impl Graph {
    /// Builds a unit-weight graph, normalizing each pair to `(min, max)`.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges: Vec<_> = edges
            .into_iter()
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        let weights = vec![1.0; edges.len()];
        Self::with_weights(node_count, edges, weights)
    }

    pub fn with_weights(
        node_count: usize,
        edges: Vec<(usize, usize)>,
        edge_weights: Vec<f64>,
    ) -> Result<Self> {
        let edges = edges
            .into_iter()
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        let g = Graph {
            node_count,
            edges,
            edge_weights,
            node_features: None,
        };
        let problems = validate_graph(&g);
        if problems.is_empty() {
            Ok(g)
        } else {
            Err(Error::Argument(problems.join("; ")))
        }
    }

    pub fn empty(node_count: usize) -> Self {
        Graph {
            node_count,
            edges: Vec::new(),
            edge_weights: Vec::new(),
            node_features: None,
        }
    }

    pub fn with_features(mut self, features: DMatrix<f64>) -> Result<Self> {
        if features.nrows() != self.node_count {
            return Err(Error::Argument(format!(
                "feature rows {} != node count {}",
                features.nrows(),
                self.node_count
            )));
        }
        self.node_features = Some(features);
        Ok(self)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbor lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Sum of incident edge weights per node.
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.node_count];
        for (&(u, v), &w) in self.edges.iter().zip(&self.edge_weights) {
            deg[u] += w;
            deg[v] += w;
        }
        deg
    }

    /// Position of each edge keyed by its normalized endpoints.
    pub fn edge_index(&self) -> std::collections::HashMap<(usize, usize), usize> {
        self.edges
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| ((u.min(v), u.max(v)), i))
            .collect()
    }

    /// Relabel nodes: node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.node_count);
        let edges = self
            .edges
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (perm[u], perm[v]);
                (a.min(b), a.max(b))
            })
            .collect();
        let node_features = self.node_features.as_ref().map(|f| {
            let mut out = DMatrix::zeros(f.nrows(), f.ncols());
            for v in 0..self.node_count {
                out.set_row(perm[v], &f.row(v));
            }
            out
        });
        Graph {
            node_count: self.node_count,
            edges,
            edge_weights: self.edge_weights.clone(),
            node_features,
        }
    }
}

/// Every invariant violation of `g`; empty iff `g` is a valid simple graph.
pub fn validate_graph(g: &Graph) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for &(u, v) in &g.edges {
        if u == v {
            out.push(format!("self-loop at {u}"));
            continue;
        }
        if u >= g.node_count || v >= g.node_count {
            out.push(format!(
                "endpoint out of range: ({u},{v}) with node_count {}",
                g.node_count
            ));
            continue;
        }
        if !seen.insert((u.min(v), u.max(v))) {
            out.push(format!("duplicate edge ({u},{v})"));
        }
    }
    if g.edge_weights.len() != g.edges.len() {
        out.push(format!(
            "edge_weights length {} != edge count {}",
            g.edge_weights.len(),
            g.edges.len()
        ));
    }
    for (i, &w) in g.edge_weights.iter().enumerate() {
        if !(w >= 0.0) || !w.is_finite() {
            out.push(format!("edge {i} has invalid weight {w}"));
        }
    }
    if let Some(f) = &g.node_features {
        if f.nrows() != g.node_count {
            out.push(format!(
                "feature rows {} != node count {}",
                f.nrows(),
                g.node_count
            ));
        }
    }
    out
}

/// Node-induced subgraph on `nodes` (deduplicated, ascending).
///
/// Returns the subgraph together with `mapping[new] = old`. Edge order, weights
/// and feature rows follow the original graph.
pub fn induced_subgraph(g: &Graph, nodes: &[usize]) -> Result<(Graph, Vec<usize>)> {
    let mut mapping: Vec<usize> = nodes.to_vec();
    mapping.sort_unstable();
    mapping.dedup();
    if let Some(&bad) = mapping.iter().find(|&&v| v >= g.node_count) {
        return Err(Error::Argument(format!(
            "node {bad} out of range for graph with {} nodes",
            g.node_count
        )));
    }
    let mut new_index = vec![usize::MAX; g.node_count];
    for (i, &v) in mapping.iter().enumerate() {
        new_index[v] = i;
    }
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for (&(u, v), &w) in g.edges.iter().zip(&g.edge_weights) {
        let (a, b) = (new_index[u], new_index[v]);
        if a != usize::MAX && b != usize::MAX {
            edges.push((a.min(b), a.max(b)));
            weights.push(w);
        }
    }
    let node_features = g
        .node_features
        .as_ref()
        .map(|f| f.select_rows(mapping.iter()));
    Ok((
        Graph {
            node_count: mapping.len(),
            edges,
            edge_weights: weights,
            node_features,
        },
        mapping,
    ))
}

/// A labeled collection of graphs for graph classification.
#[derive(Debug, Clone)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    /// Dense labels in `[0, class_count)`.
    pub labels: Vec<usize>,
    pub class_count: usize,
    /// `label_map[dense] = original label` as it appeared in the source.
    pub label_map: Vec<i64>,
}

impl GraphDataset {
    /// Builds a dataset from raw labels, remapping them to a dense range in
    /// ascending order of the original values.
    pub fn from_raw_labels(
        name: impl Into<String>,
        graphs: Vec<Graph>,
        raw: &[i64],
    ) -> Result<Self> {
        if graphs.len() != raw.len() {
            return Err(Error::Format(format!(
                "{} graphs but {} labels",
                graphs.len(),
                raw.len()
            )));
        }
        let mut label_map: Vec<i64> = raw.to_vec();
        label_map.sort_unstable();
        label_map.dedup();
        let labels = raw
            .iter()
            .map(|l| label_map.binary_search(l).expect("label present"))
            .collect();
        Ok(GraphDataset {
            name: name.into(),
            graphs,
            labels,
            class_count: label_map.len().max(1),
            label_map,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.labels.len() != self.graphs.len() {
            out.push("labels length differs from graph count".to_string());
        }
        if let Some(l) = self.labels.iter().find(|&&l| l >= self.class_count) {
            out.push(format!("label {l} outside [0, {})", self.class_count));
        }
        for (i, g) in self.graphs.iter().enumerate() {
            for p in validate_graph(g) {
                out.push(format!("graph {i}: {p}"));
            }
        }
        out
    }
}

/// Input featurization for graphs that carry no node features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMode {
    /// A single constant 1.0 per node.
    #[default]
    Constant,
    /// One-hot degree, degrees above `max_degree` share the last slot.
    DegreeOneHot { max_degree: usize },
}

/// Fills `node_features` on every graph that lacks them. Graphs that already
/// carry features (e.g. one-hot TU node labels) are left untouched.
pub fn featurize(ds: &mut GraphDataset, mode: FeatureMode) {
    for g in &mut ds.graphs {
        if g.node_features.is_some() {
            continue;
        }
        let f = match mode {
            FeatureMode::Constant => DMatrix::from_element(g.node_count, 1, 1.0),
            FeatureMode::DegreeOneHot { max_degree } => {
                let deg = g.degrees();
                let mut f = DMatrix::zeros(g.node_count, max_degree + 1);
                for (v, &d) in deg.iter().enumerate() {
                    f[(v, d.min(max_degree))] = 1.0;
                }
                f
            }
        };
        g.node_features = Some(f);
    }
}

/// Serializes in the native format: `n m` then `u v [w]` per edge, 0-based.
/// Weights are written only when some weight differs from 1.
pub fn to_native(g: &Graph) -> String {
    let weighted = g.edge_weights.iter().any(|&w| w != 1.0);
    let mut s = format!("{} {}\n", g.node_count, g.edges.len());
    for (&(u, v), &w) in g.edges.iter().zip(&g.edge_weights) {
        if weighted {
            let _ = writeln!(s, "{u} {v} {w}");
        } else {
            let _ = writeln!(s, "{u} {v}");
        }
    }
    s
}

/// Parses one or more concatenated native-format graphs.
pub fn parse_native(text: &str) -> Result<Vec<Graph>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut graphs = Vec::new();
    while let Some((lineno, header)) = lines.next() {
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(Error::Format(format!(
                "line {lineno}: expected `n m` header"
            )));
        }
        let n = parse_usize(head[0], lineno)?;
        let m = parse_usize(head[1], lineno)?;
        let mut edges = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for _ in 0..m {
            let (lineno, line) = lines.next().ok_or_else(|| {
                Error::Format(format!("expected {m} edge lines after line {lineno}"))
            })?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 2 || toks.len() > 3 {
                return Err(Error::Format(format!("line {lineno}: expected `u v [w]`")));
            }
            edges.push((parse_usize(toks[0], lineno)?, parse_usize(toks[1], lineno)?));
            let w = match toks.get(2) {
                Some(t) => t
                    .parse::<f64>()
                    .map_err(|e| Error::parse(format!("line {lineno}"), e.to_string()))?,
                None => 1.0,
            };
            weights.push(w);
        }
        let g = Graph::with_weights(n, edges, weights)
            .map_err(|e| Error::Format(format!("graph ending near line {lineno}: {e}")))?;
        graphs.push(g);
    }
    Ok(graphs)
}

fn parse_usize(tok: &str, lineno: usize) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|e| Error::parse(format!("line {lineno}"), format!("`{tok}`: {e}")))
}
