use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ImportanceWeights, WeightMode};
use crate::cohesion::{cohesive_node_set, node_levels, Property};
use crate::error::{Error, Result};
use crate::graph::{induced_subgraph, Graph};

/// Importance over the top three cohesion levels, max-normalized to `[0, 1]`.
///
/// `w(v)` counts the `k`-cohesive subgraphs containing `v` for
/// `k = max(k_max - 2, k_lo) ..= k_max` (`k_lo` = 1 for core, 2 for truss).
/// All weights are zero for edgeless graphs.
pub fn vertex_importance_prob(g: &Graph, property: Property) -> ImportanceWeights {
    let (level, k_max) = node_levels(g, property);
    let k_min = k_max.saturating_sub(2).max(property.min_k());
    let raw: Vec<f64> = level
        .iter()
        .map(|&l| {
            if k_max < k_min || l < k_min {
                0.0
            } else {
                (l.min(k_max) - k_min + 1) as f64
            }
        })
        .collect();
    let max = raw.iter().copied().fold(0.0, f64::max);
    let values = if max > 0.0 {
        raw.iter().map(|w| w / max).collect()
    } else {
        vec![0.0; raw.len()]
    };
    ImportanceWeights {
        mode: WeightMode::Probabilistic,
        values,
        normalizer_used: max,
    }
}

/// Monotone map `[0,1] -> [0,1]` applied to normalized importance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FKind {
    Linear,
    Sqrt,
    #[default]
    Square,
}

impl FKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            FKind::Linear => x,
            FKind::Sqrt => x.sqrt(),
            FKind::Square => x * x,
        }
    }
}

impl FromStr for FKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "x" => Ok(FKind::Linear),
            "sqrt" => Ok(FKind::Sqrt),
            "square" | "x2" | "x^2" => Ok(FKind::Square),
            other => Err(Error::Argument(format!("unknown f kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropPlan {
    pub node_drop_prob: Vec<f64>,
    /// Aligned with `Graph::edges`.
    pub edge_drop_prob: Vec<f64>,
    pub base_p_dr: f64,
    pub epsilon: f64,
    pub f_kind: FKind,
}

impl DropPlan {
    /// Every node and edge dropped with probability `p`.
    pub fn uniform(g: &Graph, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Argument(format!(
                "drop probability {p} outside [0, 1]"
            )));
        }
        Ok(DropPlan {
            node_drop_prob: vec![p; g.node_count],
            edge_drop_prob: vec![p; g.edges.len()],
            base_p_dr: p,
            epsilon: 0.0,
            f_kind: FKind::default(),
        })
    }
}

/// `p'(v) = (1 - f(w'(v)) * eps) * p_dr`; an edge takes the mean of its endpoints.
///
/// `eps = 0` is accepted and yields the uniform plan.
pub fn refined_drop_plan(
    g: &Graph,
    w: &ImportanceWeights,
    p_dr: f64,
    eps: f64,
    f_kind: FKind,
) -> Result<DropPlan> {
    if !(p_dr > 0.0 && p_dr < 1.0) {
        return Err(Error::Argument(format!("p_dr = {p_dr} outside (0, 1)")));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Argument(format!("eps = {eps} outside [0, 1]")));
    }
    if w.mode != WeightMode::Probabilistic {
        return Err(Error::Argument(
            "drop plans need probabilistic-mode weights".into(),
        ));
    }
    if w.values.len() != g.node_count {
        return Err(Error::Argument(format!(
            "{} weights for {} nodes",
            w.values.len(),
            g.node_count
        )));
    }
    let node_drop_prob: Vec<f64> = w
        .values
        .iter()
        .map(|&x| (1.0 - f_kind.apply(x) * eps) * p_dr)
        .collect();
    let edge_drop_prob = g
        .edges
        .iter()
        .map(|&(u, v)| (node_drop_prob[u] + node_drop_prob[v]) / 2.0)
        .collect();
    Ok(DropPlan {
        node_drop_prob,
        edge_drop_prob,
        base_p_dr: p_dr,
        epsilon: eps,
        f_kind,
    })
}

/// Identifies one augmentation draw. Each key owns an independent ChaCha
/// stream; element `i` (node or edge) consumes the `i`-th uniform of it, so a
/// draw never depends on scheduling or on other draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DrawKey {
    pub seed: u64,
    pub graph: u64,
    pub draw: u64,
}

impl DrawKey {
    pub fn new(seed: u64, graph: u64, draw: u64) -> Self {
        DrawKey { seed, graph, draw }
    }

    pub fn with_draw(self, draw: u64) -> Self {
        DrawKey { draw, ..self }
    }

    fn rng(self, lane: u64) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        bytes[0..8].copy_from_slice(&self.seed.to_le_bytes());
        bytes[8..16].copy_from_slice(&self.graph.to_le_bytes());
        bytes[16..24].copy_from_slice(&self.draw.to_le_bytes());
        bytes[24..32].copy_from_slice(&lane.to_le_bytes());
        ChaCha8Rng::from_seed(bytes)
    }
}

impl From<u64> for DrawKey {
    fn from(seed: u64) -> Self {
        DrawKey::new(seed, 0, 0)
    }
}

const NODE_LANE: u64 = 0x6e6f6465;
const EDGE_LANE: u64 = 0x65646765;

/// An augmented view together with the original index of each surviving node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDropView {
    pub graph: Graph,
    /// `kept[new] = original`.
    pub kept: Vec<usize>,
}

/// Drops each node independently with its plan probability and returns the
/// subgraph induced on survivors. If every node would drop, the node with the
/// lowest drop probability (lowest index on ties) is kept.
pub fn sample_node_drop(g: &Graph, plan: &DropPlan, key: impl Into<DrawKey>) -> NodeDropView {
    assert_eq!(
        plan.node_drop_prob.len(),
        g.node_count,
        "plan does not match graph"
    );
    let mut rng = key.into().rng(NODE_LANE);
    let mut kept: Vec<usize> = (0..g.node_count)
        .filter(|&v| rng.random::<f64>() >= plan.node_drop_prob[v])
        .collect();
    if kept.is_empty() && g.node_count > 0 {
        let best = (0..g.node_count)
            .min_by(|&a, &b| plan.node_drop_prob[a].total_cmp(&plan.node_drop_prob[b]))
            .expect("nonempty");
        kept.push(best);
    }
    let (graph, kept) = induced_subgraph(g, &kept).expect("indices in range");
    NodeDropView { graph, kept }
}

/// Drops each edge independently; the node set is unchanged.
pub fn sample_edge_drop(g: &Graph, plan: &DropPlan, key: impl Into<DrawKey>) -> Graph {
    assert_eq!(
        plan.edge_drop_prob.len(),
        g.edges.len(),
        "plan does not match graph"
    );
    let mut rng = key.into().rng(EDGE_LANE);
    let mut out = Graph {
        node_count: g.node_count,
        edges: Vec::new(),
        edge_weights: Vec::new(),
        node_features: g.node_features.clone(),
    };
    for (i, (&e, &w)) in g.edges.iter().zip(&g.edge_weights).enumerate() {
        if rng.random::<f64>() >= plan.edge_drop_prob[i] {
            out.edges.push(e);
            out.edge_weights.push(w);
        }
    }
    out
}

/// Mean fraction of the main cohesive subgraph's nodes that survive node
/// dropping, over draws `0..samples` under `key`'s seed and graph index.
pub fn preservation_ratio(
    g: &Graph,
    plan: &DropPlan,
    property: Property,
    samples: usize,
    key: impl Into<DrawKey>,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Argument("samples must be >= 1".into()));
    }
    let (_, k_max) = node_levels(g, property);
    let main = if k_max >= property.min_k() {
        cohesive_node_set(g, property, k_max)?
    } else {
        Vec::new()
    };
    if main.is_empty() {
        return Err(Error::Empty(format!(
            "graph has no main {property} subgraph"
        )));
    }
    let mut in_main = vec![false; g.node_count];
    for &v in &main {
        in_main[v] = true;
    }
    let key = key.into();
    let mut total = 0.0;
    for s in 0..samples {
        let view = sample_node_drop(g, plan, key.with_draw(s as u64));
        let hit = view.kept.iter().filter(|&&v| in_main[v]).count();
        total += hit as f64 / main.len() as f64;
    }
    Ok(total / samples as f64)
}

/// Average of per-graph [`preservation_ratio`] over the graphs that have a
/// main cohesive subgraph; graph `i` uses stream `(seed, i)`.
pub fn dataset_preservation(
    graphs: &[Graph],
    plans: &[DropPlan],
    property: Property,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (g, plan)) in graphs.iter().zip(plans).enumerate() {
        match preservation_ratio(g, plan, property, samples, DrawKey::new(seed, i as u64, 0)) {
            Ok(r) => {
                sum += r;
                count += 1;
            }
            Err(Error::Empty(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if count == 0 {
        return Err(Error::Empty("no graph has a main cohesive subgraph".into()));
    }
    Ok(sum / count as f64)
}
