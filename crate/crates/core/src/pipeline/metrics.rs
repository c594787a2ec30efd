//! Accuracy, macro-F1 and confusion counts.

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent.
    pub accuracy: f64,
    /// Unweighted mean of per-class F1, in `[0, 1]`.
    pub macro_f1: f64,
    /// `confusion[truth][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

impl Metrics {
    pub fn support(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

/// Per-class F1 is `2·tp / (2·tp + fp + fn)`, taken as 0 when the class
/// never occurs in either list.
pub fn evaluate(predictions: &[usize], labels: &[usize], num_classes: usize) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(PipelineError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(PipelineError::EmptyEvaluation);
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &t) in predictions.iter().zip(labels) {
        if p >= num_classes || t >= num_classes {
            return Err(PipelineError::ClassOutOfRange {
                class: p.max(t),
                num_classes,
            });
        }
        confusion[t][p] += 1;
    }
    let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
    let f1_sum: f64 = (0..num_classes)
        .map(|c| {
            let tp = confusion[c][c];
            let actual: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let denom = actual + predicted;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .sum();
    Ok(Metrics {
        accuracy: 100.0 * correct as f64 / labels.len() as f64,
        macro_f1: f1_sum / num_classes as f64,
        confusion,
    })
}
