//! Forward pass with cached activations and the matching reverse pass.

use nalgebra::DMatrix;

use super::params::{Linear, Params};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Everything the encoder reads from one (possibly augmented) graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    /// Dense 0/1 adjacency, `n x n`.
    pub adjacency: DMatrix<f64>,
    /// Node input features, `n x f`.
    pub features: DMatrix<f64>,
    /// Original-graph substructure rows, `n x s`; `None` for plain GIN.
    pub substructure: Option<DMatrix<f64>>,
}

impl GraphInput {
    pub fn new(g: &Graph, substructure: Option<DMatrix<f64>>) -> Result<Self> {
        let features = g
            .node_features
            .clone()
            .ok_or_else(|| Error::Argument("graph has no node features".into()))?;
        if features.nrows() != g.node_count {
            return Err(Error::Argument(format!(
                "feature rows {} != node count {}",
                features.nrows(),
                g.node_count
            )));
        }
        if let Some(s) = &substructure {
            if s.nrows() != g.node_count {
                return Err(Error::Argument(format!(
                    "substructure rows {} != node count {}",
                    s.nrows(),
                    g.node_count
                )));
            }
        }
        let n = g.node_count;
        let mut adjacency = DMatrix::zeros(n, n);
        for &(u, v) in &g.edges {
            adjacency[(u, v)] = 1.0;
            adjacency[(v, u)] = 1.0;
        }
        Ok(GraphInput {
            adjacency,
            features,
            substructure,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }
}

struct LayerCache {
    /// `[h, s]`
    input: DMatrix<f64>,
    agg: DMatrix<f64>,
    z1: DMatrix<f64>,
    a1: DMatrix<f64>,
    z2: DMatrix<f64>,
}

pub struct ForwardCache {
    layers: Vec<LayerCache>,
    /// Sum-pooled final node states, `1 x hidden`.
    pub readout: DMatrix<f64>,
    p1: DMatrix<f64>,
    a_head: DMatrix<f64>,
    /// Projection, `1 x projection_dim`.
    pub projection: DMatrix<f64>,
    node_count: usize,
}

impl ForwardCache {
    /// Sign pattern of every ReLU pre-activation; finite differences are only
    /// meaningful when it does not change under the perturbation.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.z1.iter().map(|&x| x > 0.0));
            out.extend(l.z2.iter().map(|&x| x > 0.0));
        }
        out.extend(self.p1.iter().map(|&x| x > 0.0));
        out
    }
}

fn relu(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.map(|v| v.max(0.0))
}

fn relu_grad(upstream: &DMatrix<f64>, pre: &DMatrix<f64>) -> DMatrix<f64> {
    upstream.zip_map(pre, |g, z| if z > 0.0 { g } else { 0.0 })
}

fn concat(h: &DMatrix<f64>, s: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    match s {
        None => h.clone(),
        Some(s) => {
            let mut out = DMatrix::zeros(h.nrows(), h.ncols() + s.ncols());
            out.columns_mut(0, h.ncols()).copy_from(h);
            out.columns_mut(h.ncols(), s.ncols()).copy_from(s);
            out
        }
    }
}

fn column_sums(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(1, x.ncols(), |_, c| x.column(c).sum())
}

pub fn forward(params: &Params, input: &GraphInput) -> Result<ForwardCache> {
    let s = input.substructure.as_ref();
    let first = params
        .layers
        .first()
        .map(|l| l.lin1.in_dim())
        .unwrap_or(input.features.ncols());
    let expected = input.features.ncols() + s.map_or(0, |s| s.ncols());
    if first != expected {
        return Err(Error::Argument(format!(
            "encoder expects input width {first}, got {expected}"
        )));
    }
    let mut h = input.features.clone();
    let mut layers = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let hin = concat(&h, s);
        let agg = &hin * (1.0 + layer.eps) + &input.adjacency * &hin;
        let z1 = layer.lin1.apply(&agg);
        let a1 = relu(&z1);
        let z2 = layer.lin2.apply(&a1);
        h = relu(&z2);
        layers.push(LayerCache {
            input: hin,
            agg,
            z1,
            a1,
            z2,
        });
    }
    let readout = column_sums(&h);
    let p1 = params.head.lin1.apply(&readout);
    let a_head = relu(&p1);
    let projection = params.head.lin2.apply(&a_head);
    Ok(ForwardCache {
        layers,
        readout,
        p1,
        a_head,
        projection,
        node_count: input.node_count(),
    })
}

fn linear_backward(
    lin: &Linear,
    x: &DMatrix<f64>,
    dy: &DMatrix<f64>,
    grad: &mut Linear,
) -> DMatrix<f64> {
    grad.weight += x.transpose() * dy;
    grad.bias += column_sums(dy);
    dy * lin.weight.transpose()
}

/// Accumulates into `grad` the gradient of a scalar whose derivative with
/// respect to the projection is `d_projection` (`1 x projection_dim`).
pub fn backward(
    params: &Params,
    input: &GraphInput,
    cache: &ForwardCache,
    d_projection: &DMatrix<f64>,
    train_eps: bool,
    grad: &mut Params,
) {
    let d_a_head = linear_backward(
        &params.head.lin2,
        &cache.a_head,
        d_projection,
        &mut grad.head.lin2,
    );
    let d_p1 = relu_grad(&d_a_head, &cache.p1);
    let d_readout = linear_backward(
        &params.head.lin1,
        &cache.readout,
        &d_p1,
        &mut grad.head.lin1,
    );

    // sum pooling: every node receives the readout gradient
    let hidden = d_readout.ncols();
    let mut d_h = DMatrix::from_fn(cache.node_count, hidden, |_, c| d_readout[(0, c)]);

    for (li, (layer, lc)) in params.layers.iter().zip(&cache.layers).enumerate().rev() {
        let g = &mut grad.layers[li];
        let d_z2 = relu_grad(&d_h, &lc.z2);
        let d_a1 = linear_backward(&layer.lin2, &lc.a1, &d_z2, &mut g.lin2);
        let d_z1 = relu_grad(&d_a1, &lc.z1);
        let d_agg = linear_backward(&layer.lin1, &lc.agg, &d_z1, &mut g.lin1);
        if train_eps {
            g.eps += d_agg.component_mul(&lc.input).sum();
        }
        if li == 0 {
            break;
        }
        // adjacency is symmetric
        let d_in = &d_agg * (1.0 + layer.eps) + &input.adjacency * &d_agg;
        let width = lc.input.ncols() - input.substructure.as_ref().map_or(0, |s| s.ncols());
        d_h = d_in.columns(0, width).into_owned();
    }
}
