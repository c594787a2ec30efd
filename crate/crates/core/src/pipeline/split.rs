//! Seeded per-row train/test partition.

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::features::DataMatrix;
use crate::numcore::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratify {
    #[default]
    None,
    Segment,
    Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratify_by: Stratify,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            stratify_by: Stratify::None,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_fraction > 0.0 && self.train_fraction < 1.0 {
            Ok(())
        } else {
            Err(PipelineError::InvalidConfig(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )))
        }
    }
}

/// Row indices of each side, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `mask[i]` is true for training rows.
    pub fn train_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for &i in &self.train {
            mask[i] = true;
        }
        mask
    }
}

pub const MIN_SPLIT_ROWS: usize = 5;

/// Splits `n` rows so that exactly `floor(fraction·n)` go to training.
///
/// With `strata`, every class gets its floor share and the leftover training
/// slots go to the classes with the largest fractional remainder (ties to the
/// lower class), so each class is within one row of its exact share.
pub fn split_indices(n: usize, strata: Option<&[usize]>, spec: &SplitSpec, seed: u64) -> Result<Split> {
    spec.validate()?;
    if n < MIN_SPLIT_ROWS {
        return Err(PipelineError::TooFewRows { rows: n, min: MIN_SPLIT_ROWS });
    }
    let n_train = (spec.train_fraction * n as f64).floor() as usize;
    let mut rng = Rng::new(seed);
    let mut train = match strata {
        None => {
            let mut perm = rng.permutation(n);
            perm.truncate(n_train);
            perm
        }
        Some(labels) => {
            if labels.len() != n {
                return Err(PipelineError::LengthMismatch {
                    predictions: labels.len(),
                    labels: n,
                });
            }
            let classes = labels.iter().max().map_or(0, |&m| m + 1);
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
            for (i, &c) in labels.iter().enumerate() {
                members[c].push(i);
            }
            let exact: Vec<f64> = members
                .iter()
                .map(|m| spec.train_fraction * m.len() as f64)
                .collect();
            let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
            let mut order: Vec<usize> = (0..classes).collect();
            order.sort_by(|&a, &b| {
                let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
                rb.total_cmp(&ra).then(a.cmp(&b))
            });
            let mut left = n_train - quota.iter().sum::<usize>();
            for &c in order.iter().cycle() {
                if left == 0 {
                    break;
                }
                if quota[c] < members[c].len() {
                    quota[c] += 1;
                    left -= 1;
                }
            }
            let mut chosen = Vec::with_capacity(n_train);
            for (c, m) in members.iter_mut().enumerate() {
                rng.shuffle(m);
                chosen.extend_from_slice(&m[..quota[c]]);
            }
            chosen
        }
    };
    train.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train {
        in_train[i] = true;
    }
    let test = (0..n).filter(|&i| !in_train[i]).collect();
    Ok(Split { train, test })
}

pub fn split_dataset(data: &DataMatrix, spec: &SplitSpec, seed: u64) -> Result<Split> {
    let strata = match spec.stratify_by {
        Stratify::None => None,
        Stratify::Segment => Some(data.segment_classes()),
        Stratify::Direction => Some(data.direction_classes()),
    };
    split_indices(data.rows(), strata.as_deref(), spec, seed)
}
