//! Multinomial linear classifier trained by full-batch gradient descent.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Error, Result};
use crate::labels::LabelSet;
use crate::math;
use crate::matrix::DenseMatrix;
use crate::rng::{seeded, streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.2,
            epochs: 100,
            weight_decay: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    /// `d × C`.
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub config: HeadConfig,
    pub initial_loss: f64,
    pub final_loss: f64,
}

impl LinearHead {
    /// Fits on the nodes selected by the training mask of `labels`.
    pub fn train(x: &DenseMatrix, labels: &LabelSet, config: HeadConfig) -> Result<Self> {
        labels.check_len(x.rows())?;
        if !x.all_finite() {
            return Err(invalid!("features contain non-finite values"));
        }
        let rows = labels.train_indices();
        let first = rows.first().map(|&i| labels.class(i));
        if first.is_none() || rows.iter().all(|&i| Some(labels.class(i)) == first) {
            return Err(Error::Degenerate(format!(
                "training mask must cover at least two classes ({} nodes selected)",
                rows.len()
            )));
        }
        let d = x.cols();
        let c = labels.num_classes();
        let mut rng = seeded(config.seed, streams::HEAD_INIT);
        let init = Normal::new(0.0, 0.01).expect("fixed positive std");
        let mut head = Self {
            weights: DenseMatrix::from_fn(d, c, |_, _| init.sample(&mut rng)),
            bias: vec![0.0; c],
            config,
            initial_loss: 0.0,
            final_loss: 0.0,
        };
        let m = rows.len() as f64;
        let mut loss = 0.0;
        for epoch in 0..=config.epochs {
            let mut grad_w = head.weights.scale(config.weight_decay);
            let mut grad_b = vec![0.0; c];
            loss = 0.0;
            for &i in &rows {
                let xi = x.row(i);
                let probs = softmax(&head.scores(xi));
                let yi = labels.class(i);
                loss -= math::ln(probs[yi].max(f64::MIN_POSITIVE)) / m;
                for (k, &pk) in probs.iter().enumerate() {
                    let g = (pk - f64::from(u8::from(k == yi))) / m;
                    grad_b[k] += g;
                    for (f, &xf) in xi.iter().enumerate() {
                        grad_w[(f, k)] += g * xf;
                    }
                }
            }
            let w2 = head.weights.as_slice().iter().map(|w| w * w).sum::<f64>();
            loss += 0.5 * config.weight_decay * w2;
            if epoch == 0 {
                head.initial_loss = loss;
            }
            if epoch == config.epochs {
                break;
            }
            head.weights.add_scaled(-config.learning_rate, &grad_w)?;
            for (b, g) in head.bias.iter_mut().zip(&grad_b) {
                *b -= config.learning_rate * g;
            }
        }
        head.final_loss = loss;
        Ok(head)
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    fn scores(&self, xi: &[f64]) -> Vec<f64> {
        let mut s = self.bias.clone();
        for (f, &xf) in xi.iter().enumerate() {
            for (k, sk) in s.iter_mut().enumerate() {
                *sk += xf * self.weights[(f, k)];
            }
        }
        s
    }

    /// Class scores, one row per node.
    pub fn logits(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.weights.rows() {
            return Err(shape_err((x.rows(), self.weights.rows()), x.shape()));
        }
        let data = x.row_iter().flat_map(|r| self.scores(r)).collect();
        DenseMatrix::from_vec(x.rows(), self.num_classes(), data)
    }

    /// Argmax class per node; ties go to the lower class id.
    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<usize>> {
        let logits = self.logits(x)?;
        Ok(logits.row_iter().map(argmax).collect())
    }
}

fn softmax(s: &[f64]) -> Vec<f64> {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| math::exp(v - max)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Percentage of nodes in `eval_mask` whose predicted class matches.
pub fn accuracy(
    head: &LinearHead,
    x: &DenseMatrix,
    labels: &LabelSet,
    eval_mask: &[bool],
) -> Result<f64> {
    labels.check_len(x.rows())?;
    if eval_mask.len() != x.rows() {
        return Err(invalid!(
            "evaluation mask covers {} nodes, expected {}",
            eval_mask.len(),
            x.rows()
        ));
    }
    let total = eval_mask.iter().filter(|&&m| m).count();
    if total == 0 {
        return Err(invalid!("evaluation mask is empty"));
    }
    let pred = head.predict(x)?;
    let hits = (0..x.rows())
        .filter(|&i| eval_mask[i] && pred[i] == labels.class(i))
        .count();
    Ok(100.0 * hits as f64 / total as f64)
}

/// Accuracy on the complement of the training mask.
pub fn test_accuracy(head: &LinearHead, x: &DenseMatrix, labels: &LabelSet) -> Result<f64> {
    let eval: Vec<bool> = labels.train_mask().iter().map(|&t| !t).collect();
    accuracy(head, x, labels, &eval)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (DenseMatrix, LabelSet) {
        let xs = [-3.0, -2.0, -1.5, -1.0, 1.0, 1.5, 2.0, 3.0];
        let x = DenseMatrix::column_vector(&xs);
        let labels = LabelSet::fully_labeled(xs.iter().map(|&v| usize::from(v > 0.0)).collect());
        (x, labels)
    }

    #[test]
    fn separable_data_is_fit() {
        let (x, labels) = separable();
        let head = LinearHead::train(&x, &labels, HeadConfig::default()).unwrap();
        assert_eq!(accuracy(&head, &x, &labels, &[true; 8]).unwrap(), 100.0);
        assert!(head.final_loss < head.initial_loss);
    }

    #[test]
    fn identical_features_give_majority_rate() {
        let x = DenseMatrix::filled(10, 3, 1.0);
        let classes = vec![0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        let mut mask = vec![true; 10];
        // train on 3 + 5, evaluate on the held-out 1 + 1
        mask[3] = false;
        mask[9] = false;
        let labels = LabelSet::new(classes.clone(), mask).unwrap();
        let head = LinearHead::train(&x, &labels, HeadConfig::default()).unwrap();
        let pred = head.predict(&x).unwrap();
        assert!(pred.iter().all(|&p| p == 1));
        assert_eq!(test_accuracy(&head, &x, &labels).unwrap(), 50.0);
    }

    #[test]
    fn accuracy_counting() {
        let (x, labels) = separable();
        let head = LinearHead::train(&x, &labels, HeadConfig::default()).unwrap();
        let flipped = LabelSet::fully_labeled(labels.classes().iter().map(|&c| 1 - c).collect());
        assert_eq!(accuracy(&head, &x, &flipped, &[true; 8]).unwrap(), 0.0);

        let tied = LinearHead {
            weights: DenseMatrix::zeros(1, 2),
            bias: vec![0.0, 0.0],
            config: HeadConfig::default(),
            initial_loss: 0.0,
            final_loss: 0.0,
        };
        let ten = DenseMatrix::zeros(10, 1);
        let split = LabelSet::fully_labeled(vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(accuracy(&tied, &ten, &split, &[true; 10]).unwrap(), 60.0);
    }

    #[test]
    fn single_class_mask_is_degenerate() {
        let (x, labels) = separable();
        let mask = labels.classes().iter().map(|&c| c == 0).collect();
        let one = labels.with_mask(mask).unwrap();
        assert!(matches!(
            LinearHead::train(&x, &one, HeadConfig::default()),
            Err(Error::Degenerate(_))
        ));
        assert!(accuracy(
            &LinearHead::train(&x, &labels, HeadConfig::default()).unwrap(),
            &x,
            &labels,
            &[false; 8]
        )
        .is_err());
    }

    #[test]
    fn same_seed_same_weights() {
        let (x, labels) = separable();
        let a = LinearHead::train(&x, &labels, HeadConfig::default()).unwrap();
        let b = LinearHead::train(&x, &labels, HeadConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
