//! Contrastive training loop: one encoder per cohesion property.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gradcheck::{batch_loss_and_grad, ViewPair};
use super::{
    encode, graph_input, init_state, Embedding, EncoderConfig, EncoderState, OptimizerKind,
};
use crate::augment::{
    refined_drop_plan, sample_node_drop, vertex_importance_prob, DrawKey, DropPlan, FKind,
};
use crate::cohesion::Property;
use crate::error::{Error, Result};
use crate::graph::GraphDataset;
use crate::substructure::SubstructureFeatures;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    /// One encoder is trained per entry, in this order.
    pub properties: Vec<Property>,
    /// Base node-drop probability.
    pub p_dr: f64,
    /// Strength of the cohesion-aware refinement; `0` gives uniform dropping.
    pub eps: f64,
    pub f_kind: FKind,
    /// Worker threads; `0` uses the rayon default.
    pub jobs: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            properties: vec![Property::Core, Property::Truss],
            p_dr: 0.2,
            eps: 0.2,
            f_kind: FKind::default(),
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyRun {
    pub property: Property,
    pub state: EncoderState,
    pub step_losses: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub runs: Vec<PropertyRun>,
}

fn property_tag(p: Property) -> u64 {
    match p {
        Property::Core => 0,
        Property::Truss => 1,
    }
}

pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start {jobs} workers: {e}")))
}

/// Drop plans for every graph of `ds`.
pub fn drop_plans(
    ds: &GraphDataset,
    property: Property,
    opts: &TrainOptions,
) -> Result<Vec<DropPlan>> {
    ds.graphs
        .par_iter()
        .map(|g| {
            if opts.eps == 0.0 {
                DropPlan::uniform(g, opts.p_dr)
            } else {
                let w = vertex_importance_prob(g, property);
                refined_drop_plan(g, &w, opts.p_dr, opts.eps, opts.f_kind)
            }
        })
        .collect()
}

/// Graph indices grouped into batches for one epoch. A trailing batch of one
/// graph is merged into its predecessor, since a single pair has no negatives.
pub fn epoch_batches(
    graph_count: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..graph_count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    order.shuffle(&mut rng);
    let mut batches: Vec<Vec<usize>> = order
        .chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let last = batches.pop().expect("nonempty");
        batches.last_mut().expect("nonempty").extend(last);
    }
    batches
}

fn apply_update(st: &mut EncoderState, grad: &[f64], cfg: &EncoderConfig) {
    st.step += 1;
    let mut flat = st.params.to_vec();
    match cfg.optimizer {
        OptimizerKind::Sgd => {
            for (x, g) in flat.iter_mut().zip(grad) {
                *x -= cfg.learning_rate * g;
            }
        }
        OptimizerKind::Adam => {
            let t = st.step as i32;
            let c1 = 1.0 - ADAM_BETA1.powi(t);
            let c2 = 1.0 - ADAM_BETA2.powi(t);
            let (m, v) = (&mut st.optimizer.m, &mut st.optimizer.v);
            for i in 0..flat.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
                flat[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
    st.params.set_from_slice(&flat);
}

/// One optimizer step on `batch`; returns the pre-update loss.
pub fn train_step(st: &mut EncoderState, batch: &[ViewPair], cfg: &EncoderConfig) -> Result<f64> {
    let (loss, grad) = batch_loss_and_grad(&st.params, batch, cfg)?;
    if !loss.is_finite() {
        return Err(Error::Diverged { step: st.step });
    }
    apply_update(st, &grad.to_vec(), cfg);
    if !st.params.all_finite() {
        return Err(Error::Diverged { step: st.step });
    }
    Ok(loss)
}

fn make_views(
    ds: &GraphDataset,
    substructure: Option<&[SubstructureFeatures]>,
    plans: &[DropPlan],
    batch: &[usize],
    aug_seed: u64,
    epoch: u64,
    cfg: &EncoderConfig,
) -> Result<Vec<ViewPair>> {
    batch
        .par_iter()
        .map(|&i| {
            let g = &ds.graphs[i];
            let view = |v: u64| {
                let key = DrawKey::new(aug_seed, i as u64, epoch * 2 + v);
                let drop = sample_node_drop(g, &plans[i], key);
                let s = substructure.map(|s| s[i].select(&drop.kept));
                graph_input(&drop.graph, s.as_ref(), cfg)
            };
            Ok(ViewPair {
                anchor: view(0)?,
                positive: view(1)?,
            })
        })
        .collect()
}

fn train_one(
    ds: &GraphDataset,
    substructure: Option<&[SubstructureFeatures]>,
    cfg: &EncoderConfig,
    opts: &TrainOptions,
    property: Property,
) -> Result<PropertyRun> {
    let feature_dim = ds
        .graphs
        .iter()
        .find_map(|g| g.node_features.as_ref().map(|f| f.ncols()))
        .ok_or_else(|| Error::Argument("dataset has no node features".into()))?;
    let sub_dim = substructure
        .and_then(|s| s.first())
        .map_or(0, |s| s.matrix.ncols());
    let seed = cfg.seed.wrapping_add(property_tag(property));
    let mut st = init_state(
        &EncoderConfig {
            seed,
            ..cfg.clone()
        },
        feature_dim,
        sub_dim,
    )?;
    let plans = drop_plans(ds, property, opts)?;

    let mut step_losses = Vec::new();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs as u64 {
        let mut sum = 0.0;
        let batches = epoch_batches(ds.len(), cfg.batch_size, seed, epoch);
        for batch in &batches {
            let views = make_views(ds, substructure, &plans, batch, seed, epoch, cfg)?;
            let loss = train_step(&mut st, &views, cfg)?;
            step_losses.push(loss);
            sum += loss;
        }
        epoch_losses.push(sum / batches.len().max(1) as f64);
    }
    Ok(PropertyRun {
        property,
        state: st,
        step_losses,
        epoch_losses,
    })
}

/// Trains one encoder per property in `opts.properties`. The result depends
/// only on the inputs and `cfg.seed`, not on `opts.jobs`.
pub fn train(
    ds: &GraphDataset,
    substructure: Option<&[SubstructureFeatures]>,
    cfg: &EncoderConfig,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::Empty(format!("dataset `{}` has no graphs", ds.name)));
    }
    if opts.properties.is_empty() {
        return Err(Error::Argument("no cohesion property selected".into()));
    }
    if cfg.use_ogsn {
        match substructure {
            None => {
                return Err(Error::Argument(
                    "use_ogsn set but no substructure features given".into(),
                ))
            }
            Some(s) if s.len() != ds.len() => {
                return Err(Error::Argument(format!(
                    "{} substructure blocks for {} graphs",
                    s.len(),
                    ds.len()
                )))
            }
            _ => {}
        }
    }
    let pool = thread_pool(opts.jobs)?;
    pool.install(|| {
        let runs = opts
            .properties
            .iter()
            .map(|&p| train_one(ds, substructure, cfg, opts, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainReport { runs })
    })
}

/// Embeddings of the unaugmented graphs, in dataset order.
pub fn embed_dataset(
    ds: &GraphDataset,
    substructure: Option<&[SubstructureFeatures]>,
    st: &EncoderState,
    cfg: &EncoderConfig,
) -> Result<Vec<Embedding>> {
    ds.graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| encode(g, substructure.map(|s| &s[i]), st, cfg))
        .collect()
}
