//! Node class labels with a training mask.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    classes: Vec<usize>,
    train_mask: Vec<bool>,
}

impl LabelSet {
    pub fn new(classes: Vec<usize>, train_mask: Vec<bool>) -> Result<Self> {
        if classes.len() != train_mask.len() {
            return Err(invalid!(
                "{} class ids but {} mask entries",
                classes.len(),
                train_mask.len()
            ));
        }
        Ok(Self {
            classes,
            train_mask,
        })
    }

    /// Every node labeled and in the training mask.
    pub fn fully_labeled(classes: Vec<usize>) -> Self {
        let train_mask = alloc::vec![true; classes.len()];
        Self {
            classes,
            train_mask,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn train_mask(&self) -> &[bool] {
        &self.train_mask
    }

    #[inline]
    pub fn class(&self, i: usize) -> usize {
        self.classes[i]
    }

    #[inline]
    pub fn is_trained(&self, i: usize) -> bool {
        self.train_mask[i]
    }

    pub fn num_classes(&self) -> usize {
        self.classes.iter().max().map_or(0, |&c| c + 1)
    }

    /// Fraction of nodes in the training mask.
    pub fn labeled_ratio(&self) -> f64 {
        if self.classes.is_empty() {
            return 0.0;
        }
        self.train_count() as f64 / self.len() as f64
    }

    pub fn train_count(&self) -> usize {
        self.train_mask.iter().filter(|&&m| m).count()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.train_mask[i]).collect()
    }

    /// Nodes outside the training mask.
    pub fn eval_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.train_mask[i]).collect()
    }

    pub fn with_mask(&self, train_mask: Vec<bool>) -> Result<Self> {
        Self::new(self.classes.clone(), train_mask)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(invalid!(
                "label set covers {} nodes, graph has {n}",
                self.len()
            ));
        }
        Ok(())
    }

    /// Per-class random mask: within each class, `round(ratio · class size)`
    /// nodes are marked as training nodes.
    pub fn stratified_mask<R: Rng + ?Sized>(&self, ratio: f64, rng: &mut R) -> Result<Vec<bool>> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(invalid!("training ratio {ratio} outside [0, 1]"));
        }
        let mut mask = alloc::vec![false; self.len()];
        for c in 0..self.num_classes() {
            let mut members: Vec<usize> =
                (0..self.len()).filter(|&i| self.classes[i] == c).collect();
            members.shuffle(rng);
            let take = libm::round(ratio * members.len() as f64) as usize;
            for &i in &members[..take.min(members.len())] {
                mask[i] = true;
            }
        }
        Ok(mask)
    }

    pub fn stratified_split<R: Rng + ?Sized>(&self, ratio: f64, rng: &mut R) -> Result<Self> {
        let mask = self.stratified_mask(ratio, rng)?;
        self.with_mask(mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use alloc::vec;

    #[test]
    fn ratio_and_indices() {
        let l = LabelSet::new(vec![0, 1, 1, 0], vec![true, false, true, false]).unwrap();
        assert_eq!(l.labeled_ratio(), 0.5);
        assert_eq!(l.train_indices(), vec![0, 2]);
        assert_eq!(l.eval_indices(), vec![1, 3]);
        assert_eq!(l.num_classes(), 2);
        assert!(LabelSet::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn stratified_split_keeps_class_balance() {
        let classes: Vec<usize> = (0..100).map(|i| usize::from(i >= 50)).collect();
        let l = LabelSet::fully_labeled(classes);
        let split = l.stratified_split(0.6, &mut seeded(3, 0)).unwrap();
        let train = split.train_indices();
        assert_eq!(train.len(), 60);
        assert_eq!(train.iter().filter(|&&i| i < 50).count(), 30);
        assert_eq!(split, l.stratified_split(0.6, &mut seeded(3, 0)).unwrap());
    }
}
