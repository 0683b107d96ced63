//! Confusion matrices and F1 scores.
//!
//! Macro F1 is the unweighted mean of per-class F1 over the classes that
//! appear in either the truth or the predictions. A class whose precision
//! and recall are both zero scores 0.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    Micro,
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(num_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != num_classes * num_classes {
            return Err(Error::MetricInput(alloc::format!(
                "{} counts for {num_classes} classes",
                counts.len()
            )));
        }
        Ok(Self {
            num_classes,
            counts,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.num_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn true_count(&self, class: usize) -> u64 {
        (0..self.num_classes).map(|p| self.get(class, p)).sum()
    }

    pub fn predicted_count(&self, class: usize) -> u64 {
        (0..self.num_classes).map(|t| self.get(t, class)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.num_classes).all(|t| (0..self.num_classes).all(|p| t == p || self.get(t, p) == 0))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks_exact(self.num_classes.max(1))
    }
}

pub fn confusion(
    truth: &[usize],
    predicted: &[usize],
    num_classes: usize,
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::MetricInput(alloc::format!(
            "{} labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![0u64; num_classes * num_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= num_classes || p >= num_classes {
            return Err(Error::MetricInput(alloc::format!(
                "label pair ({t}, {p}) outside {num_classes} classes"
            )));
        }
        counts[t * num_classes + p] += 1;
    }
    Ok(ConfusionMatrix {
        num_classes,
        counts,
    })
}

pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::MetricInput("empty confusion matrix".into()));
    }
    let mut sum = 0.0;
    let mut present = 0usize;
    for c in 0..cm.num_classes {
        let tp = cm.get(c, c) as f64;
        let actual = cm.true_count(c) as f64;
        let predicted = cm.predicted_count(c) as f64;
        if actual == 0.0 && predicted == 0.0 {
            continue;
        }
        present += 1;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(sum / present as f64)
}

/// Micro F1; for single-label multi-class data this equals accuracy.
pub fn micro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::MetricInput("empty confusion matrix".into()));
    }
    let tp: u64 = (0..cm.num_classes).map(|c| cm.get(c, c)).sum();
    Ok(tp as f64 / total as f64)
}

pub fn f1(cm: &ConfusionMatrix, averaging: Averaging) -> Result<f64> {
    match averaging {
        Averaging::Macro => macro_f1(cm),
        Averaging::Micro => micro_f1(cm),
    }
}

/// Convenience: F1 straight from label vectors.
pub fn f1_score(
    truth: &[usize],
    predicted: &[usize],
    num_classes: usize,
    averaging: Averaging,
) -> Result<f64> {
    f1(&confusion(truth, predicted, num_classes)?, averaging)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_off_diagonal() {
        let cm = confusion(&[0, 1], &[0, 1], 2).unwrap();
        assert_eq!(cm.counts, [1, 0, 0, 1]);
        let cm = confusion(&[0, 0], &[1, 1], 2).unwrap();
        assert_eq!(cm.counts, [0, 2, 0, 0]);
    }

    #[test]
    fn input_errors() {
        assert!(confusion(&[0], &[0, 1], 2).is_err());
        assert!(confusion(&[2], &[0], 2).is_err());
        let empty = confusion(&[], &[], 3).unwrap();
        assert!(macro_f1(&empty).is_err());
        assert!(micro_f1(&empty).is_err());
    }

    #[test]
    fn reference_scores() {
        assert_eq!(
            macro_f1(&confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap()).unwrap(),
            1.0
        );
        let half = ConfusionMatrix::from_counts(2, alloc::vec![1, 1, 1, 1]).unwrap();
        assert!((macro_f1(&half).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(
            macro_f1(&confusion(&[0, 1, 0], &[1, 0, 1], 2).unwrap()).unwrap(),
            0.0
        );
    }

    #[test]
    fn absent_classes_are_excluded() {
        // Class 2 never occurs; without exclusion the mean would be 2/3.
        let cm = confusion(&[0, 1], &[0, 1], 3).unwrap();
        assert_eq!(macro_f1(&cm).unwrap(), 1.0);
    }

    #[test]
    fn micro_is_accuracy() {
        let cm = confusion(&[0, 1, 1, 2], &[0, 1, 2, 2], 3).unwrap();
        assert!((micro_f1(&cm).unwrap() - 0.75).abs() < 1e-15);
    }
}
