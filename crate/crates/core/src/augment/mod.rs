//! Cohesion-guided topology augmentation.
//!
//! * [`probabilistic`]: node importance from nested cohesive subgraphs, refined
//!   node/edge drop probabilities, seeded sampling of augmented views, and the
//!   main-subgraph preservation statistic.
//! * [`diffusion`]: mean-normalized importance, edge reweighting, and dense
//!   personalized-PageRank diffusion.

pub mod diffusion;
pub mod probabilistic;

use serde::{Deserialize, Serialize};

pub use diffusion::{
    mix_importance, ppr_diffusion, reweight_edges, transition_matrix, vertex_importance_det,
    DiffusionMatrix,
};
pub use probabilistic::{
    dataset_preservation, preservation_ratio, refined_drop_plan, sample_edge_drop,
    sample_node_drop, vertex_importance_prob, DrawKey, DropPlan, FKind, NodeDropView,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    Probabilistic,
    Deterministic,
}

/// Per-node importance derived from cohesive subgraph membership.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceWeights {
    pub mode: WeightMode,
    pub values: Vec<f64>,
    /// The max (probabilistic) or mean (deterministic) of the raw counts.
    pub normalizer_used: f64,
}
