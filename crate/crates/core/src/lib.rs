//! Cohesion-aware graph contrastive learning.
//!
//! k-core / k-truss decompositions drive two things: node-drop and edge-drop
//! probabilities that spare cohesive regions, and edge reweighting ahead of a
//! personalized-PageRank diffusion. Per-node clique counts computed once on the
//! original graphs are concatenated into every layer of a GIN encoder, trained
//! with an NT-Xent objective and evaluated by a linear probe.

pub mod augment;
pub mod cohesion;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod pipeline;
pub mod substructure;
pub mod tu;

pub use cohesion::Property;
pub use error::{Error, Result};
pub use graph::{Graph, GraphDataset};
