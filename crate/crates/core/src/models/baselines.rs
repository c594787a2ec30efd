//! Comparison classifiers operating on flat per-sample rows.

use serde::{Deserialize, Serialize};

use super::{check_labels, config_hash, ModelError, ModelParams, Result, TrainedModel, TrainingMeta};
use crate::numcore::{softmax, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineKind {
    Knn { k: usize },
    LinearSvm { lambda: f64, epochs: usize, lr: f64 },
    LogisticRegression { lr: f64, epochs: usize, batch_size: usize },
    RandomGuess,
}

impl BaselineKind {
    pub const KNN: Self = BaselineKind::Knn { k: 5 };
    pub const LINEAR_SVM: Self = BaselineKind::LinearSvm {
        lambda: 0.01,
        epochs: 200,
        lr: 0.01,
    };
    pub const LOGISTIC_REGRESSION: Self = BaselineKind::LogisticRegression {
        lr: 0.1,
        epochs: 100,
        batch_size: 32,
    };

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            BaselineKind::Knn { k } => k > 0,
            BaselineKind::LinearSvm { lambda, epochs, lr } => lambda > 0.0 && epochs > 0 && lr > 0.0,
            BaselineKind::LogisticRegression { lr, epochs, batch_size } => {
                lr > 0.0 && epochs > 0 && batch_size > 0
            }
            BaselineKind::RandomGuess => true,
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// Stored training set; Euclidean distance, majority vote.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub x: Matrix,
    pub y: Vec<usize>,
    pub num_classes: usize,
}

impl KnnModel {
    /// Nearest rows by (distance, row index); the vote goes to the most
    /// frequent label, ties to the smallest label.
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .iter_rows()
            .enumerate()
            .map(|(i, r)| {
                let d: f64 = r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let k = self.k.min(dist.len());
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; self.num_classes];
        for &(_, i) in &dist[..k] {
            votes[self.y[i]] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        best
    }
}

/// One score per class: `W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearModel {
    fn zeros(classes: usize, width: usize) -> Self {
        Self {
            weights: Matrix::zeros(classes, width),
            bias: vec![0.0; classes],
        }
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter_rows()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect()
    }
}

fn train_svm(x: &Matrix, y: &[usize], classes: usize, lambda: f64, epochs: usize, lr: f64, rng: &mut Rng) -> LinearModel {
    let mut m = LinearModel::zeros(classes, x.cols());
    for _ in 0..epochs {
        for i in rng.permutation(x.rows()) {
            let row = x.row(i);
            for c in 0..classes {
                let target = if y[i] == c { 1.0 } else { -1.0 };
                let w = m.weights.row_mut(c);
                let margin = target * (w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + m.bias[c]);
                let violated = margin < 1.0;
                for (wj, &xj) in w.iter_mut().zip(row) {
                    let g = lambda * *wj - if violated { target * xj } else { 0.0 };
                    *wj -= lr * g;
                }
                if violated {
                    m.bias[c] += lr * target;
                }
            }
        }
    }
    m
}

fn train_logistic(
    x: &Matrix,
    y: &[usize],
    classes: usize,
    lr: f64,
    epochs: usize,
    batch_size: usize,
    rng: &mut Rng,
) -> (LinearModel, f64) {
    let mut m = LinearModel::zeros(classes, x.cols());
    let mut gw = Matrix::zeros(classes, x.cols());
    let mut gb = vec![0.0; classes];
    let mut last_loss = 0.0;
    for _ in 0..epochs {
        let mut epoch_loss = 0.0;
        for batch in rng.permutation(x.rows()).chunks(batch_size) {
            gw.as_mut_slice().fill(0.0);
            gb.fill(0.0);
            for &i in batch {
                let row = x.row(i);
                let mut p = softmax(&m.scores(row));
                epoch_loss -= p[y[i]].max(f64::MIN_POSITIVE).ln();
                p[y[i]] -= 1.0;
                for (c, &d) in p.iter().enumerate() {
                    gb[c] += d;
                    for (g, &xj) in gw.row_mut(c).iter_mut().zip(row) {
                        *g += d * xj;
                    }
                }
            }
            let step = lr / batch.len() as f64;
            for (w, g) in m.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                *w -= step * g;
            }
            for (b, g) in m.bias.iter_mut().zip(&gb) {
                *b -= step * g;
            }
        }
        last_loss = epoch_loss / x.rows() as f64;
    }
    (m, last_loss)
}

pub fn train_baseline(
    kind: BaselineKind,
    x: &Matrix,
    y: &[usize],
    num_classes: usize,
    seed: u64,
) -> Result<TrainedModel> {
    kind.validate()?;
    if x.rows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    if y.len() != x.rows() {
        return Err(ModelError::ShapeMismatch(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if num_classes < 2 {
        return Err(ModelError::InvalidConfig(format!("{num_classes} classes")));
    }
    check_labels(y, num_classes)?;
    let mut rng = Rng::new(seed);
    let mut final_loss = None;
    let params = match kind {
        BaselineKind::Knn { k } => {
            if k > x.rows() {
                return Err(ModelError::NotEnoughNeighbors { k, rows: x.rows() });
            }
            ModelParams::Knn(KnnModel {
                k,
                x: x.clone(),
                y: y.to_vec(),
                num_classes,
            })
        }
        BaselineKind::LinearSvm { lambda, epochs, lr } => {
            ModelParams::LinearSvm(train_svm(x, y, num_classes, lambda, epochs, lr, &mut rng))
        }
        BaselineKind::LogisticRegression { lr, epochs, batch_size } => {
            let (m, loss) = train_logistic(x, y, num_classes, lr, epochs, batch_size, &mut rng);
            final_loss = Some(loss);
            ModelParams::LogisticRegression(m)
        }
        BaselineKind::RandomGuess => ModelParams::RandomGuess,
    };
    Ok(TrainedModel {
        meta: TrainingMeta {
            seed,
            config_hash: config_hash(&kind),
            final_loss,
            input_width: x.cols(),
            num_classes,
        },
        params,
    })
}

/// Empirical accuracy (%) of uniform guessing against labels drawn from
/// `labels`' empirical distribution.
pub fn random_guess_accuracy(labels: &[usize], num_classes: usize, draws: usize, seed: u64) -> Result<f64> {
    if labels.is_empty() || draws == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    check_labels(labels, num_classes)?;
    let mut rng = Rng::new(seed);
    let hits = (0..draws)
        .filter(|_| {
            let truth = labels[rng.below(labels.len())];
            rng.below(num_classes) == truth
        })
        .count();
    Ok(100.0 * hits as f64 / draws as f64)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::{any, prop_assert_eq, proptest};

    use super::*;

    fn accuracy(model: &TrainedModel, x: &Matrix, y: &[usize]) -> f64 {
        let p = model.predict_classes(x).unwrap();
        p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    /// Two classes separated by the line x0 + x1 = 0 with a margin.
    fn separable(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        while rows.len() < n {
            let p = [rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
            let s = p[0] + p[1];
            if s.abs() < 0.3 {
                continue;
            }
            y.push(usize::from(s < 0.0));
            rows.push(p);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn knn_one_recovers_its_training_set() {
        let (x, y) = separable(100, 1);
        let m = train_baseline(BaselineKind::Knn { k: 1 }, &x, &y, 2, 0).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
    }

    #[test]
    fn knn_vote_ties_go_to_smallest_label() {
        let x = Matrix::from_rows(&[[1.0], [-1.0]]).unwrap();
        let m = train_baseline(BaselineKind::Knn { k: 2 }, &x, &[1, 0], 2, 0).unwrap();
        assert_eq!(m.predict_classes(&Matrix::from_rows(&[[0.9]]).unwrap()).unwrap(), vec![0]);
    }

    #[test]
    fn knn_needs_enough_rows() {
        let x = Matrix::zeros(3, 2);
        assert_eq!(
            train_baseline(BaselineKind::KNN, &x, &[0, 1, 0], 2, 0),
            Err(ModelError::NotEnoughNeighbors { k: 5, rows: 3 })
        );
        assert_eq!(
            train_baseline(BaselineKind::KNN, &Matrix::zeros(0, 2), &[], 2, 0),
            Err(ModelError::EmptyTrainingSet)
        );
    }

    #[test]
    fn svm_separates_linear_data() {
        let (x, y) = separable(200, 2);
        let (xt, yt) = separable(200, 3);
        let m = train_baseline(BaselineKind::LINEAR_SVM, &x, &y, 2, 4).unwrap();
        assert!(accuracy(&m, &xt, &yt) >= 0.95);
    }

    #[test]
    fn logistic_regression_separates_linear_data() {
        let (x, y) = separable(200, 5);
        let (xt, yt) = separable(200, 6);
        let m = train_baseline(BaselineKind::LOGISTIC_REGRESSION, &x, &y, 2, 7).unwrap();
        assert!(accuracy(&m, &xt, &yt) >= 0.95);
        let p = m.predict_proba(xt.row(0)).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(m.meta.final_loss.unwrap() < 0.3);
    }

    #[test]
    fn random_guess_matches_class_count() {
        let four: Vec<usize> = (0..624).map(|i| i % 4).collect();
        let acc = random_guess_accuracy(&four, 4, 100_000, 1).unwrap();
        assert!((acc - 25.0).abs() <= 1.0, "{acc}");
        let two: Vec<usize> = (0..624).map(|i| i % 2).collect();
        let acc = random_guess_accuracy(&two, 2, 100_000, 2).unwrap();
        assert!((acc - 50.0).abs() <= 1.0, "{acc}");
    }

    #[test]
    fn predictions_are_deterministic() {
        let (x, y) = separable(50, 8);
        for kind in [BaselineKind::KNN, BaselineKind::LINEAR_SVM, BaselineKind::LOGISTIC_REGRESSION, BaselineKind::RandomGuess] {
            let a = train_baseline(kind, &x, &y, 2, 9).unwrap();
            let b = train_baseline(kind, &x, &y, 2, 9).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.predict_classes(&x).unwrap(), a.predict_classes(&x).unwrap());
        }
    }

    proptest! {
        #[test]
        fn knn_ignores_training_row_order(
            pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0usize..3), 6..40),
            q in (-10.0f64..10.0, -10.0f64..10.0),
            seed in any::<u64>(),
        ) {
            let x = Matrix::from_rows(&pts.iter().map(|p| [p.0, p.1]).collect::<Vec<_>>()).unwrap();
            let y: Vec<usize> = pts.iter().map(|p| p.2).collect();
            let perm = Rng::new(seed).permutation(pts.len());
            let xp = x.select_rows(&perm);
            let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
            let a = train_baseline(BaselineKind::KNN, &x, &y, 3, 0).unwrap();
            let b = train_baseline(BaselineKind::KNN, &xp, &yp, 3, 0).unwrap();
            let query = Matrix::from_rows(&[[q.0, q.1]]).unwrap();
            prop_assert_eq!(a.predict_classes(&query).unwrap(), b.predict_classes(&query).unwrap());
        }
    }
}
