//! Trainable classifiers: the segment MLP, the direction LSTM and the
//! KNN / linear SVM / logistic regression / random-guess baselines.
//!
//! Every trainer is a pure function of `(data, config, seed)`.

mod baselines;
mod lstm;
mod mlp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::{stable_hash_hex, Matrix, ModelContainer, NumError, Parameters};

pub use baselines::{
    random_guess_accuracy, train_baseline, BaselineKind, KnnModel, LinearModel,
};
pub use lstm::{
    heldout_predictions, predict_lstm, predict_lstm_steps, sliding_windows, train_lstm, LstmConfig,
    LstmMode, LstmModel, LstmNet, Sequence,
};
pub use mlp::{predict_mlp, train_mlp, MlpConfig, MlpNet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("sequence of length {len} is shorter than window {window}")]
    SequenceTooShort { len: usize, window: usize },
    #[error("k = {k} neighbours requested but only {rows} training rows")]
    NotEnoughNeighbors { k: usize, rows: usize },
    #[error("label {label} outside 0..{classes}")]
    BadLabel { label: usize, classes: usize },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("{model} does not support {operation}")]
    Unsupported { model: &'static str, operation: &'static str },
    #[error(transparent)]
    Num(#[from] NumError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Lstm,
    Knn,
    LinearSvm,
    LogisticRegression,
    RandomGuess,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Lstm => "lstm",
            ModelKind::Knn => "knn",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::RandomGuess => "random_guess",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub config_hash: String,
    /// Mean training loss over the last epoch, for iteratively trained models.
    pub final_loss: Option<f64>,
    pub input_width: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Mlp(MlpNet),
    Lstm(LstmModel),
    Knn(KnnModel),
    LinearSvm(LinearModel),
    LogisticRegression(LinearModel),
    RandomGuess,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub meta: TrainingMeta,
    pub params: ModelParams,
}

pub(crate) fn config_hash<T: Serialize>(cfg: &T) -> String {
    stable_hash_hex(serde_json::to_string(cfg).expect("configs are plain data").as_bytes())
}

pub(crate) fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= classes) {
        Some(&label) => Err(ModelError::BadLabel { label, classes }),
        None => Ok(()),
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    // first maximum wins, so ties go to the smallest class index
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match &self.params {
            ModelParams::Mlp(_) => ModelKind::Mlp,
            ModelParams::Lstm(_) => ModelKind::Lstm,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::LinearSvm(_) => ModelKind::LinearSvm,
            ModelParams::LogisticRegression(_) => ModelKind::LogisticRegression,
            ModelParams::RandomGuess => ModelKind::RandomGuess,
        }
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.meta.input_width {
            return Err(ModelError::ShapeMismatch(format!(
                "{} trained on width {}, got {width}",
                self.kind().as_str(),
                self.meta.input_width
            )));
        }
        Ok(())
    }

    /// Class probabilities for one row (MLP and logistic regression).
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width(x.len())?;
        match &self.params {
            ModelParams::Mlp(net) => Ok(net.probabilities(x)),
            ModelParams::LogisticRegression(m) => Ok(crate::numcore::softmax(&m.scores(x))),
            _ => Err(ModelError::Unsupported {
                model: self.kind().as_str(),
                operation: "per-row probabilities",
            }),
        }
    }

    /// Predicted class for every row of `x`.
    ///
    /// Random guessing draws from a stream seeded by the model seed, so the
    /// same call always returns the same guesses.
    pub fn predict_classes(&self, x: &Matrix) -> Result<Vec<usize>> {
        if !matches!(self.params, ModelParams::RandomGuess) {
            self.check_width(x.cols())?;
        }
        let rows = x.iter_rows();
        Ok(match &self.params {
            ModelParams::Mlp(net) => rows.map(|r| argmax(&net.logits(r))).collect(),
            ModelParams::Knn(m) => rows.map(|r| m.predict(r)).collect(),
            ModelParams::LinearSvm(m) | ModelParams::LogisticRegression(m) => {
                rows.map(|r| argmax(&m.scores(r))).collect()
            }
            ModelParams::RandomGuess => {
                let mut rng = crate::numcore::Rng::new(self.meta.seed);
                (0..x.rows()).map(|_| rng.below(self.meta.num_classes)).collect()
            }
            ModelParams::Lstm(_) => {
                return Err(ModelError::Unsupported {
                    model: "lstm",
                    operation: "row-wise prediction",
                })
            }
        })
    }

    pub fn to_container(&self) -> ModelContainer {
        let mut c = ModelContainer::new(self.kind().as_str()).with_meta("training", &self.meta);
        match &self.params {
            ModelParams::Mlp(net) => {
                for (i, l) in net.layers.iter().enumerate() {
                    c.push_matrix(format!("dense{i}.weight"), &l.weights);
                    c.push_vector(format!("dense{i}.bias"), &l.bias);
                }
                c = c.with_meta("layers", net.layers.len());
            }
            ModelParams::Lstm(m) => {
                for (i, cell) in m.net.cells.iter().enumerate() {
                    c.push_matrix(format!("lstm{i}.weight"), &cell.weights);
                    c.push_vector(format!("lstm{i}.bias"), &cell.bias);
                }
                c.push_matrix("head.weight", &m.net.head.weights);
                c.push_vector("head.bias", &m.net.head.bias);
                c = c
                    .with_meta("layers", m.net.cells.len())
                    .with_meta("window_len", m.window_len)
                    .with_meta("mode", m.mode);
            }
            ModelParams::Knn(m) => {
                c.push_matrix("train.x", &m.x);
                c.push_vector("train.y", &m.y.iter().map(|&v| v as f64).collect::<Vec<_>>());
                c = c.with_meta("k", m.k);
            }
            ModelParams::LinearSvm(m) | ModelParams::LogisticRegression(m) => {
                c.push_matrix("weight", &m.weights);
                c.push_vector("bias", &m.bias);
            }
            ModelParams::RandomGuess => {}
        }
        c
    }

    pub fn from_container(c: &ModelContainer) -> Result<Self> {
        let meta: TrainingMeta = c.meta("training")?;
        let params = match c.kind.as_str() {
            "mlp" => {
                let n: usize = c.meta("layers")?;
                let layers = (0..n)
                    .map(|i| {
                        Ok(crate::numcore::DenseLayer {
                            weights: c.matrix(&format!("dense{i}.weight"))?,
                            bias: c.vector(&format!("dense{i}.bias"))?,
                        })
                    })
                    .collect::<std::result::Result<Vec<_>, NumError>>()?;
                ModelParams::Mlp(MlpNet { layers })
            }
            "lstm" => {
                let n: usize = c.meta("layers")?;
                let cells = (0..n)
                    .map(|i| {
                        let weights = c.matrix(&format!("lstm{i}.weight"))?;
                        let hidden = weights.rows() / 4;
                        Ok(crate::numcore::LstmCell {
                            input: weights.cols() - hidden,
                            hidden,
                            weights,
                            bias: c.vector(&format!("lstm{i}.bias"))?,
                        })
                    })
                    .collect::<std::result::Result<Vec<_>, NumError>>()?;
                let head = crate::numcore::DenseLayer {
                    weights: c.matrix("head.weight")?,
                    bias: c.vector("head.bias")?,
                };
                ModelParams::Lstm(LstmModel {
                    net: LstmNet { cells, head },
                    window_len: c.meta("window_len")?,
                    mode: c.meta("mode")?,
                })
            }
            "knn" => ModelParams::Knn(KnnModel {
                k: c.meta("k")?,
                x: c.matrix("train.x")?,
                y: c.vector("train.y")?.into_iter().map(|v| v as usize).collect(),
                num_classes: meta.num_classes,
            }),
            "linear_svm" | "logistic_regression" => {
                let m = LinearModel {
                    weights: c.matrix("weight")?,
                    bias: c.vector("bias")?,
                };
                if c.kind == "linear_svm" {
                    ModelParams::LinearSvm(m)
                } else {
                    ModelParams::LogisticRegression(m)
                }
            }
            "random_guess" => ModelParams::RandomGuess,
            other => {
                return Err(NumError::BadContainer(format!("unknown model kind {other:?}")).into())
            }
        };
        Ok(Self { meta, params })
    }

    pub fn num_params(&self) -> usize {
        match &self.params {
            ModelParams::Mlp(net) => net.num_params(),
            ModelParams::Lstm(m) => m.net.num_params(),
            ModelParams::Knn(m) => m.x.as_slice().len(),
            ModelParams::LinearSvm(m) | ModelParams::LogisticRegression(m) => {
                m.weights.as_slice().len() + m.bias.len()
            }
            ModelParams::RandomGuess => 0,
        }
    }
}
