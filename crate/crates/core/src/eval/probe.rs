use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

/// Fixed linear-probe settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            learning_rate: 0.1,
            l2: 1e-4,
        }
    }
}

/// Node labels with disjoint train/validation/test index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSplit {
    pub labels: Vec<usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl LabeledSplit {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.labels.len() != num_nodes {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {num_nodes} embedding rows",
                self.labels.len()
            )));
        }
        for (name, set) in [("train", &self.train), ("validation", &self.val), ("test", &self.test)] {
            if set.is_empty() {
                return Err(Error::EmptySet(match name {
                    "train" => "train split",
                    "validation" => "validation split",
                    _ => "test split",
                }));
            }
            if let Some(&i) = set.iter().find(|&&i| i >= num_nodes) {
                return Err(Error::IndexOutOfRange { index: i, num_nodes });
            }
        }
        let mut seen = vec![false; num_nodes];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!("node {i} appears in more than one split")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOutcome {
    /// Test accuracy (%) at the iteration with the best validation accuracy.
    pub accuracy: f64,
    pub val_accuracy: f64,
    pub best_iteration: usize,
}

/// Centers columns and divides by the global RMS. Both steps commute with an
/// orthogonal rotation of the embedding space.
fn standardize(z: &Matrix) -> Matrix {
    let (n, d) = z.shape();
    let mut means = vec![0.0; d];
    for r in 0..n {
        for (m, v) in means.iter_mut().zip(z.row(r)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut out = z.clone();
    for r in 0..n {
        for (x, m) in out.row_mut(r).iter_mut().zip(&means) {
            *x -= m;
        }
    }
    let rms = out.frobenius_norm() / ((n * d) as f64).sqrt();
    if rms > 0.0 {
        out = out.scale(1.0 / rms);
    }
    out
}

fn predict(x: &[f64], w: &Matrix, b: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (c, bias) in b.iter().enumerate() {
        let s = bias + x.iter().enumerate().map(|(k, v)| v * w.get(k, c)).sum::<f64>();
        if s > best_score {
            best_score = s;
            best = c;
        }
    }
    best
}

fn accuracy(x: &Matrix, labels: &[usize], idx: &[usize], w: &Matrix, b: &[f64]) -> f64 {
    let correct = idx.iter().filter(|&&i| predict(x.row(i), w, b) == labels[i]).count();
    100.0 * correct as f64 / idx.len() as f64
}

/// Multinomial logistic regression trained by full-batch gradient descent on
/// the train nodes; the iterate with the best validation accuracy is scored
/// on the test nodes.
pub fn linear_probe(z: &Matrix, split: &LabeledSplit, cfg: &ProbeConfig) -> Result<ProbeOutcome> {
    split.validate(z.rows())?;
    let classes = split.labels.iter().copied().max().map_or(0, |m| m + 1);
    let first = split.labels[split.train[0]];
    if split.train.iter().all(|&i| split.labels[i] == first) {
        return Err(Error::InvalidArgument("linear probe needs at least two classes in the train split".into()));
    }
    if !z.is_finite() {
        return Err(Error::NonFinite("linear_probe input"));
    }

    let x = standardize(z);
    let d = x.cols();
    let mut w = Matrix::zeros(d, classes);
    let mut b = vec![0.0; classes];
    let inv_n = 1.0 / split.train.len() as f64;
    let mut best = ProbeOutcome {
        accuracy: 0.0,
        val_accuracy: -1.0,
        best_iteration: 0,
    };
    let mut probs = vec![0.0; classes];
    for iter in 1..=cfg.iterations {
        let mut gw = w.scale(cfg.l2);
        let mut gb = vec![0.0; classes];
        for &i in &split.train {
            let xi = x.row(i);
            for (c, p) in probs.iter_mut().enumerate() {
                *p = b[c] + xi.iter().enumerate().map(|(k, v)| v * w.get(k, c)).sum::<f64>();
            }
            let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for p in probs.iter_mut() {
                *p = (*p - max).exp();
                total += *p;
            }
            for (c, p) in probs.iter().enumerate() {
                let err = (p / total - f64::from(u8::from(split.labels[i] == c))) * inv_n;
                gb[c] += err;
                for (k, v) in xi.iter().enumerate() {
                    gw.set(k, c, gw.get(k, c) + err * v);
                }
            }
        }
        for (wv, g) in w.as_mut_slice().iter_mut().zip(gw.as_slice()) {
            *wv -= cfg.learning_rate * g;
        }
        for (bv, g) in b.iter_mut().zip(&gb) {
            *bv -= cfg.learning_rate * g;
        }
        let val_acc = accuracy(&x, &split.labels, &split.val, &w, &b);
        if val_acc > best.val_accuracy {
            best = ProbeOutcome {
                accuracy: accuracy(&x, &split.labels, &split.test, &w, &b),
                val_accuracy: val_acc,
                best_iteration: iter,
            };
        }
    }
    Ok(best)
}
