//! NT-Xent over cosine similarities with exact gradients.
//!
//! For anchors `a_i` and positives `p_i` (`i < B`):
//!
//! ```text
//! l_i = -log( exp(cos(a_i, p_i) / tau) / sum_j exp(cos(a_i, p_j) / tau) )
//! ```
//!
//! The denominator runs over every positive in the batch, so the matched
//! positive is included and the other graphs' views act as negatives. The
//! batch loss is the mean of `l_i`.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NtXentOutput {
    pub loss: f64,
    pub per_anchor: Vec<f64>,
    pub grad_anchors: Vec<DVector<f64>>,
    pub grad_positives: Vec<DVector<f64>>,
}

pub fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

pub fn ntxent_loss(
    anchors: &[DVector<f64>],
    positives: &[DVector<f64>],
    tau: f64,
) -> Result<NtXentOutput> {
    let b = anchors.len();
    if b == 0 || positives.len() != b {
        return Err(Error::Argument(format!(
            "need equal nonempty batches, got {} anchors and {} positives",
            b,
            positives.len()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::Argument(format!("tau = {tau} must be positive")));
    }
    let norms = |v: &[DVector<f64>]| -> Result<Vec<f64>> {
        v.iter()
            .enumerate()
            .map(|(i, x)| {
                let n = x.norm();
                if n > 0.0 && n.is_finite() {
                    Ok(n)
                } else {
                    Err(Error::Argument(format!("embedding {i} has norm {n}")))
                }
            })
            .collect()
    };
    let na = norms(anchors)?;
    let np = norms(positives)?;

    let mut sim = vec![vec![0.0; b]; b];
    for i in 0..b {
        for j in 0..b {
            sim[i][j] = anchors[i].dot(&positives[j]) / (na[i] * np[j]);
        }
    }

    let mut per_anchor = Vec::with_capacity(b);
    let mut grad_anchors = vec![DVector::zeros(anchors[0].len()); b];
    let mut grad_positives = vec![DVector::zeros(positives[0].len()); b];
    for i in 0..b {
        let logits: Vec<f64> = sim[i].iter().map(|s| s / tau).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        per_anchor.push(max + z.ln() - logits[i]);
        for j in 0..b {
            let softmax = exps[j] / z;
            let d_logit = (softmax - if i == j { 1.0 } else { 0.0 }) / b as f64;
            let d_sim = d_logit / tau;
            if d_sim == 0.0 {
                continue;
            }
            let (a, p) = (&anchors[i], &positives[j]);
            let s = sim[i][j];
            grad_anchors[i] += (p / (na[i] * np[j]) - a * (s / (na[i] * na[i]))) * d_sim;
            grad_positives[j] += (a / (na[i] * np[j]) - p * (s / (np[j] * np[j]))) * d_sim;
        }
    }
    let loss = per_anchor.iter().sum::<f64>() / b as f64;
    Ok(NtXentOutput {
        loss,
        per_anchor,
        grad_anchors,
        grad_positives,
    })
}
