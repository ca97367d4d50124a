//! Batch loss shared by training and the finite-difference gradient check.

use nalgebra::{DMatrix, DVector};

use super::forward::{backward, forward, GraphInput};
use super::loss::ntxent_loss;
use super::params::Params;
use super::{EncoderConfig, EncoderState};
use crate::error::Result;

/// Two views of the same original graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewPair {
    pub anchor: GraphInput,
    pub positive: GraphInput,
}

fn projection(cache: &super::ForwardCache) -> DVector<f64> {
    DVector::from_row_slice(cache.projection.as_slice())
}

pub fn batch_loss(params: &Params, batch: &[ViewPair], cfg: &EncoderConfig) -> Result<f64> {
    let mut a = Vec::with_capacity(batch.len());
    let mut p = Vec::with_capacity(batch.len());
    for pair in batch {
        a.push(projection(&forward(params, &pair.anchor)?));
        p.push(projection(&forward(params, &pair.positive)?));
    }
    Ok(ntxent_loss(&a, &p, cfg.tau)?.loss)
}

/// Loss and its gradient with respect to every parameter. Forward and
/// backward passes run per graph on the current rayon pool; gradients are
/// summed in batch order.
pub fn batch_loss_and_grad(
    params: &Params,
    batch: &[ViewPair],
    cfg: &EncoderConfig,
) -> Result<(f64, Params)> {
    use rayon::prelude::*;

    let caches = batch
        .par_iter()
        .map(|pair| {
            Ok((
                forward(params, &pair.anchor)?,
                forward(params, &pair.positive)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let a: Vec<_> = caches.iter().map(|(c, _)| projection(c)).collect();
    let p: Vec<_> = caches.iter().map(|(_, c)| projection(c)).collect();
    let out = ntxent_loss(&a, &p, cfg.tau)?;

    let as_row = |v: &DVector<f64>| DMatrix::from_row_slice(1, v.len(), v.as_slice());
    let partials: Vec<Params> = batch
        .par_iter()
        .zip(&caches)
        .enumerate()
        .map(|(i, (pair, (ca, cp)))| {
            let mut g = params.zeros_like();
            backward(
                params,
                &pair.anchor,
                ca,
                &as_row(&out.grad_anchors[i]),
                cfg.train_gin_eps,
                &mut g,
            );
            backward(
                params,
                &pair.positive,
                cp,
                &as_row(&out.grad_positives[i]),
                cfg.train_gin_eps,
                &mut g,
            );
            g
        })
        .collect();
    let mut grad = params.zeros_like();
    for g in &partials {
        grad.add_assign(g);
    }
    Ok((out.loss, grad))
}

fn relu_patterns(params: &Params, batch: &[ViewPair]) -> Result<Vec<bool>> {
    let mut out = Vec::new();
    for pair in batch {
        out.extend(forward(params, &pair.anchor)?.relu_pattern());
        out.extend(forward(params, &pair.positive)?.relu_pattern());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    /// Parameters compared.
    pub checked: usize,
    /// Parameters whose perturbation crossed a ReLU kink.
    pub skipped: usize,
}

/// Denominator floor for the relative error, so that two gradients that are
/// both essentially zero compare as equal.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// `max |a - n| / max(|a|, |n|, floor)` over entries where `numeric` is known.
pub fn max_relative_error(analytic: &[f64], numeric: &[Option<f64>]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .filter_map(|(&a, n)| n.map(|n| (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR)))
        .fold(0.0, f64::max)
}

/// Central differences with step `h` for every parameter. An entry is `None`
/// when the perturbation flips any ReLU, since the loss is not differentiable
/// across that kink.
pub fn numeric_gradient(
    params: &Params,
    batch: &[ViewPair],
    cfg: &EncoderConfig,
    h: f64,
) -> Result<Vec<Option<f64>>> {
    let base = params.to_vec();
    let pattern = relu_patterns(params, batch)?;
    let mut probe = params.clone();
    let frozen = if cfg.train_gin_eps {
        Vec::new()
    } else {
        eps_slots(params)
    };
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        if frozen.contains(&i) {
            out.push(Some(0.0));
            continue;
        }
        let mut flat = base.clone();
        flat[i] = base[i] + h;
        probe.set_from_slice(&flat);
        let same_up = relu_patterns(&probe, batch)? == pattern;
        let up = batch_loss(&probe, batch, cfg)?;
        flat[i] = base[i] - h;
        probe.set_from_slice(&flat);
        let same_down = relu_patterns(&probe, batch)? == pattern;
        let down = batch_loss(&probe, batch, cfg)?;
        out.push((same_up && same_down).then(|| (up - down) / (2.0 * h)));
    }
    Ok(out)
}

fn eps_slots(params: &Params) -> Vec<usize> {
    let mut at = 0;
    params
        .layers
        .iter()
        .map(|l| {
            at += l.lin1.weight.len() + l.lin1.bias.len() + l.lin2.weight.len() + l.lin2.bias.len();
            let slot = at;
            at += 1;
            slot
        })
        .collect()
}

/// Compares the analytic gradient of the full batch loss with central finite
/// differences (step `1e-5`).
pub fn gradcheck(
    st: &EncoderState,
    batch: &[ViewPair],
    cfg: &EncoderConfig,
) -> Result<GradcheckReport> {
    let (_, grad) = batch_loss_and_grad(&st.params, batch, cfg)?;
    let numeric = numeric_gradient(&st.params, batch, cfg, 1e-5)?;
    let analytic = grad.to_vec();
    Ok(GradcheckReport {
        max_rel_error: max_relative_error(&analytic, &numeric),
        checked: numeric.iter().filter(|n| n.is_some()).count(),
        skipped: numeric.iter().filter(|n| n.is_none()).count(),
    })
}
