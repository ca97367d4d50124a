//! GIN encoder with optional original-graph substructure features, trained
//! contrastively with hand-written reverse-mode gradients.
//!
//! Layer `l` computes, for every node `v`,
//!
//! ```text
//! h'_v      = [h_v, s_v]                      (s_v omitted without substructures)
//! h_v^{l+1} = MLP_l((1 + eps_l) h'_v + sum_{u in N(v)} h'_u)
//! ```
//!
//! where `s_v` is the clique-count row of `v` in the *original* graph, carried
//! through augmentation by node identity. The graph embedding is the sum of the
//! final node states; a two-layer projection head feeds the NT-Xent loss.

mod forward;
pub mod gradcheck;
pub mod io;
mod loss;
mod params;
mod train;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use forward::{backward, forward, ForwardCache, GraphInput};
pub use gradcheck::{batch_loss, batch_loss_and_grad, gradcheck, GradcheckReport, ViewPair};
pub use loss::{cosine, ntxent_loss, NtXentOutput};
pub use params::{GinLayer, Head, Linear, Params};
pub(crate) use train::thread_pool;
pub use train::{
    drop_plans, embed_dataset, epoch_batches, train, train_step, PropertyRun, TrainOptions,
    TrainReport,
};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::substructure::SubstructureFeatures;

pub type Embedding = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub layer_count: usize,
    pub hidden_dim: usize,
    pub projection_dim: usize,
    pub use_ogsn: bool,
    pub tau: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Initial GIN self-weight `eps`.
    pub gin_eps: f64,
    /// Whether `eps` is learned.
    pub train_gin_eps: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layer_count: 3,
            hidden_dim: 32,
            projection_dim: 32,
            use_ogsn: true,
            tau: 0.2,
            epochs: 20,
            batch_size: 16,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            gin_eps: 0.0,
            train_gin_eps: false,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("layer_count", self.layer_count as f64),
            ("hidden_dim", self.hidden_dim as f64),
            ("projection_dim", self.projection_dim as f64),
            ("tau", self.tau),
            ("epochs", self.epochs as f64),
            ("batch_size", self.batch_size as f64),
            ("learning_rate", self.learning_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!(
                    "encoder.{name} must be positive, got {v}"
                )));
            }
        }
        if !self.gin_eps.is_finite() || self.gin_eps <= -1.0 {
            return Err(Error::Argument(format!(
                "encoder.gin_eps = {} must exceed -1",
                self.gin_eps
            )));
        }
        Ok(())
    }
}

/// Adam first/second moments (unused by SGD).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub params: Params,
    pub optimizer: OptimizerState,
    pub step: u64,
    pub feature_dim: usize,
    pub substructure_dim: usize,
}

impl EncoderState {
    pub fn hidden_dim(&self) -> usize {
        self.params.head.lin1.in_dim()
    }
}

/// Fresh parameters drawn from a ChaCha stream seeded by `cfg.seed`.
/// Substructure width only enters the layers when `cfg.use_ogsn` is set.
pub fn init_state(
    cfg: &EncoderConfig,
    feature_dim: usize,
    substructure_dim: usize,
) -> Result<EncoderState> {
    cfg.validate()?;
    if feature_dim == 0 {
        return Err(Error::Argument("feature_dim must be >= 1".into()));
    }
    if cfg.use_ogsn && substructure_dim == 0 {
        return Err(Error::Argument(
            "substructure_dim must be >= 1 with use_ogsn".into(),
        ));
    }
    let sub = if cfg.use_ogsn { substructure_dim } else { 0 };
    let params = Params::init(
        cfg.seed,
        cfg.layer_count,
        feature_dim,
        sub,
        cfg.hidden_dim,
        cfg.projection_dim,
        cfg.gin_eps,
    );
    let n = params.len();
    Ok(EncoderState {
        params,
        optimizer: OptimizerState {
            m: vec![0.0; n],
            v: vec![0.0; n],
        },
        step: 0,
        feature_dim,
        substructure_dim: sub,
    })
}

/// Builds the encoder input for `g`, attaching substructure rows when the
/// config asks for them.
pub fn graph_input(
    g: &Graph,
    s: Option<&SubstructureFeatures>,
    cfg: &EncoderConfig,
) -> Result<GraphInput> {
    let sub = if cfg.use_ogsn {
        let s = s.ok_or_else(|| {
            Error::Argument("use_ogsn set but no substructure features given".into())
        })?;
        Some(s.matrix.clone())
    } else {
        None
    };
    GraphInput::new(g, sub)
}

/// Pre-projection graph embedding (sum of final node states).
pub fn encode(
    g: &Graph,
    s: Option<&SubstructureFeatures>,
    st: &EncoderState,
    cfg: &EncoderConfig,
) -> Result<Embedding> {
    let input = graph_input(g, s, cfg)?;
    let cache = forward(&st.params, &input)?;
    Ok(DVector::from_row_slice(cache.readout.as_slice()))
}

/// Concatenation of per-property embeddings in the given order.
pub fn fuse_embeddings(per_property: &[Embedding]) -> Result<Embedding> {
    if per_property.is_empty() {
        return Err(Error::Argument("nothing to fuse".into()));
    }
    if let Some(i) = per_property
        .iter()
        .position(|e| e.iter().any(|x| !x.is_finite()))
    {
        return Err(Error::Argument(format!("embedding {i} is not finite")));
    }
    let data: Vec<f64> = per_property
        .iter()
        .flat_map(|e| e.iter().copied())
        .collect();
    Ok(DVector::from_vec(data))
}
