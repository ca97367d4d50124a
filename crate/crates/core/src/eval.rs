//! k-fold linear-probe evaluation of frozen graph embeddings.
//!
//! The probe is multinomial logistic regression with an L2 penalty, fitted by
//! full-batch gradient descent from zero weights on features standardized
//! with the training split's mean and standard deviation.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohesion::{cohesion_feature_vector, Property};
use crate::error::{Error, Result};
use crate::graph::GraphDataset;

/// Assignment of every sample to one of `fold_count` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub fold_count: usize,
    /// `assignments[i]` is the fold of sample `i`.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle of `0..n` cut into `k` contiguous chunks; the first `n % k`
/// folds get one extra sample.
pub fn kfold_splits(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::Argument(format!(
            "need 2 <= folds <= samples, got {k} folds for {n} samples"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut assignments = vec![0; n];
    let mut at = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &i in &order[at..at + size] {
            assignments[i] = fold;
        }
        at += size;
    }
    Ok(FoldPlan {
        fold_count: k,
        assignments,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub l2: f64,
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            l2: 1e-3,
            iterations: 500,
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    /// `class_count x dim`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub l2: f64,
    /// Standardization fitted on the training split.
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in z.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in z.iter_mut() {
        *x /= sum;
    }
}

impl ProbeModel {
    /// Rows of `x` are samples.
    pub fn fit(
        x: &DMatrix<f64>,
        y: &[usize],
        class_count: usize,
        cfg: &ProbeConfig,
    ) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 || y.len() != n {
            return Err(Error::Argument(format!(
                "{n} samples for {} labels",
                y.len()
            )));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= class_count) {
            return Err(Error::Argument(format!(
                "label {bad} outside {class_count} classes"
            )));
        }
        let mean = DVector::from_fn(d, |j, _| x.column(j).mean());
        let scale = DVector::from_fn(d, |j, _| {
            let s = (x
                .column(j)
                .iter()
                .map(|v| (v - mean[j]).powi(2))
                .sum::<f64>()
                / n as f64)
                .sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        });
        let xs = standardize(x, &mean, &scale);
        let mut w = DMatrix::zeros(class_count, d);
        let mut b = DVector::zeros(class_count);
        for _ in 0..cfg.iterations {
            // residual = softmax(X W^T + b) - onehot(y)
            let mut r = &xs * w.transpose();
            for i in 0..n {
                let mut row: Vec<f64> = (0..class_count).map(|c| r[(i, c)] + b[c]).collect();
                softmax_in_place(&mut row);
                row[y[i]] -= 1.0;
                for c in 0..class_count {
                    r[(i, c)] = row[c];
                }
            }
            let gw = r.transpose() * &xs / n as f64 + &w * cfg.l2;
            let gb = DVector::from_fn(class_count, |c, _| r.column(c).sum() / n as f64);
            w -= gw * cfg.learning_rate;
            b -= gb * cfg.learning_rate;
        }
        if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step: cfg.iterations as u64,
            });
        }
        Ok(ProbeModel {
            weights: w,
            bias: b,
            l2: cfg.l2,
            mean,
            scale,
        })
    }

    /// Arg-max class per row; ties go to the lowest class index.
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        let scores = standardize(x, &self.mean, &self.scale) * self.weights.transpose();
        (0..scores.nrows())
            .map(|i| {
                let mut best = 0;
                for c in 1..scores.ncols() {
                    if scores[(i, c)] + self.bias[c] > scores[(i, best)] + self.bias[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

fn standardize(x: &DMatrix<f64>, mean: &DVector<f64>, scale: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        (x[(i, j)] - mean[j]) / scale[j]
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
}

/// Accuracy and macro-averaged precision/recall. A class with no predicted
/// (resp. true) samples contributes precision (resp. recall) 0.
pub fn metrics(preds: &[usize], labels: &[usize], class_count: usize) -> Result<Metrics> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(Error::Argument(format!(
            "need aligned nonempty predictions, got {} and {}",
            preds.len(),
            labels.len()
        )));
    }
    if class_count == 0 || preds.iter().chain(labels).any(|&c| c >= class_count) {
        return Err(Error::Argument(format!(
            "class index outside 0..{class_count}"
        )));
    }
    let mut tp = vec![0usize; class_count];
    let mut predicted = vec![0usize; class_count];
    let mut actual = vec![0usize; class_count];
    for (&p, &l) in preds.iter().zip(labels) {
        predicted[p] += 1;
        actual[l] += 1;
        if p == l {
            tp[p] += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let k = class_count as f64;
    Ok(Metrics {
        accuracy: ratio(tp.iter().sum(), preds.len()),
        macro_precision: (0..class_count)
            .map(|c| ratio(tp[c], predicted[c]))
            .sum::<f64>()
            / k,
        macro_recall: (0..class_count)
            .map(|c| ratio(tp[c], actual[c]))
            .sum::<f64>()
            / k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub l2: f64,
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let probe = ProbeConfig::default();
        EvalConfig {
            folds: 10,
            repeats: 1,
            seed: 0,
            l2: probe.l2,
            iterations: probe.iterations,
            learning_rate: probe.learning_rate,
        }
    }
}

impl EvalConfig {
    pub fn probe(&self) -> ProbeConfig {
        ProbeConfig {
            l2: self.l2,
            iterations: self.iterations,
            learning_rate: self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub metrics: Metrics,
    /// Probe accuracy on its own training split.
    pub train_accuracy: f64,
    /// Accuracy of predicting the training split's majority class on it.
    pub train_majority: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSummary {
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    /// Population standard deviation over all (repeat, fold) accuracies.
    pub std_accuracy: f64,
    /// Whether every probe matched or beat a constant predictor on its own
    /// training split.
    pub sanity_ok: bool,
}

impl ProbeSummary {
    fn from_folds(folds: Vec<FoldResult>) -> Self {
        let n = folds.len() as f64;
        let mean = folds.iter().map(|f| f.metrics.accuracy).sum::<f64>() / n;
        let var = folds
            .iter()
            .map(|f| (f.metrics.accuracy - mean).powi(2))
            .sum::<f64>()
            / n;
        let sanity_ok = folds
            .iter()
            .all(|f| f.train_accuracy + 1e-12 >= f.train_majority);
        ProbeSummary {
            folds,
            mean_accuracy: mean,
            std_accuracy: var.sqrt(),
            sanity_ok,
        }
    }

    /// `fold,repeat,accuracy,precision,recall` rows with a fixed 6-decimal format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,repeat,accuracy,precision,recall\n");
        for f in &self.folds {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6}",
                f.fold,
                f.repeat,
                f.metrics.accuracy,
                f.metrics.macro_precision,
                f.metrics.macro_recall
            );
        }
        out
    }

    pub fn summary_line(&self) -> String {
        format!(
            "accuracy {:.4} ± {:.4} over {} folds",
            self.mean_accuracy,
            self.std_accuracy,
            self.folds.len()
        )
    }
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

fn majority_fraction(y: &[usize], class_count: usize) -> f64 {
    let mut counts = vec![0usize; class_count];
    for &c in y {
        counts[c] += 1;
    }
    *counts.iter().max().unwrap_or(&0) as f64 / y.len().max(1) as f64
}

/// Fits and scores one probe per fold of `plan`.
pub fn train_linear_probe(
    x: &DMatrix<f64>,
    labels: &[usize],
    class_count: usize,
    plan: &FoldPlan,
    probe: &ProbeConfig,
    repeat: usize,
) -> Result<Vec<FoldResult>> {
    if x.nrows() != labels.len() || plan.assignments.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} embeddings, {} labels, {} fold assignments",
            x.nrows(),
            labels.len(),
            plan.assignments.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument(
            "embeddings contain non-finite values".into(),
        ));
    }
    (0..plan.fold_count)
        .into_par_iter()
        .map(|fold| {
            let (tr, te) = (plan.train_indices(fold), plan.test_indices(fold));
            let ytr: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
            let yte: Vec<usize> = te.iter().map(|&i| labels[i]).collect();
            if ytr.iter().all(|&c| c == ytr[0]) {
                return Err(Error::DegenerateFold { fold });
            }
            let xtr = rows(x, &tr);
            let model = ProbeModel::fit(&xtr, &ytr, class_count, probe)?;
            let train_accuracy = metrics(&model.predict(&xtr), &ytr, class_count)?.accuracy;
            Ok(FoldResult {
                repeat,
                fold,
                metrics: metrics(&model.predict(&rows(x, &te)), &yte, class_count)?,
                train_accuracy,
                train_majority: majority_fraction(&ytr, class_count),
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Stacks embeddings as matrix rows.
pub fn embedding_matrix(embeddings: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let d = embeddings.first().map(|e| e.len()).unwrap_or(0);
    if embeddings.is_empty() || embeddings.iter().any(|e| e.len() != d) {
        return Err(Error::Argument(
            "embeddings must be nonempty and of equal length".into(),
        ));
    }
    Ok(DMatrix::from_fn(embeddings.len(), d, |i, j| {
        embeddings[i][j]
    }))
}

/// `cfg.repeats` rounds of k-fold probing; round `r` reseeds the split with
/// `cfg.seed + r`.
pub fn evaluate(
    x: &DMatrix<f64>,
    labels: &[usize],
    class_count: usize,
    cfg: &EvalConfig,
) -> Result<ProbeSummary> {
    if cfg.repeats == 0 {
        return Err(Error::Argument("repeats must be >= 1".into()));
    }
    let mut folds = Vec::new();
    for r in 0..cfg.repeats {
        let plan = kfold_splits(labels.len(), cfg.folds, cfg.seed.wrapping_add(r as u64))?;
        folds.extend(train_linear_probe(
            x,
            labels,
            class_count,
            &plan,
            &cfg.probe(),
            r,
        )?);
    }
    Ok(ProbeSummary::from_folds(folds))
}

/// Probe on cohesion-count features: the number of nodes in each `i`-core
/// (and/or `i`-truss) subgraph up to `k`.
pub fn cohesion_baseline(
    ds: &GraphDataset,
    k: usize,
    properties: &[Property],
    cfg: &EvalConfig,
) -> Result<ProbeSummary> {
    if ds.is_empty() {
        return Err(Error::Empty(format!("dataset `{}` has no graphs", ds.name)));
    }
    let feats: Vec<DVector<f64>> = ds
        .graphs
        .par_iter()
        .map(|g| DVector::from_vec(cohesion_feature_vector(g, k, properties)))
        .collect();
    evaluate(&embedding_matrix(&feats)?, &ds.labels, ds.class_count, cfg)
}
