//! Feed-forward segment classifier: ReLU hidden layers, softmax head,
//! mini-batch Adam.

use serde::{Deserialize, Serialize};

use super::{check_labels, config_hash, ModelError, ModelParams, Result, TrainedModel, TrainingMeta};
use crate::numcore::{
    relu, softmax, softmax_cross_entropy, AdamConfig, AdamState, DenseLayer, Matrix, Parameters, Rng,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    /// Expected input width; 0 takes the width of the training matrix.
    pub input_width: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            input_width: 0,
            hidden: vec![64, 32],
            output: 4,
            lr: 0.001,
            epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    pub layers: Vec<DenseLayer>,
}

impl Parameters for MlpNet {
    fn visit(&self, f: &mut dyn FnMut(&[f64], bool)) {
        self.layers.as_slice().visit(f)
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64], bool)) {
        self.layers.as_mut_slice().visit_mut(f)
    }
}

impl MlpNet {
    pub fn init(widths: &[usize], rng: &mut Rng) -> Self {
        let layers = widths
            .windows(2)
            .map(|w| DenseLayer::init(w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.output_width()];
            layer.forward_into(&a, &mut z);
            a = if i < last { relu(&z) } else { z };
        }
        a
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Cross-entropy of one example; gradients are added into `grad`.
    pub fn accumulate_gradient(&self, x: &[f64], target: usize, grad: &mut MlpNet) -> Result<f64> {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.output_width()];
            layer.forward_into(&a, &mut z);
            inputs.push(a);
            a = if i < last { relu(&z) } else { z.clone() };
            pre.push(z);
        }
        let (loss, mut delta) = softmax_cross_entropy(&a, target)?;
        for i in (0..self.layers.len()).rev() {
            if i < last {
                for (d, &p) in delta.iter_mut().zip(&pre[i]) {
                    if p <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            if i == 0 {
                self.layers[0].backward_params_only(&inputs[0], &delta, &mut grad.layers[0]);
            } else {
                delta = self.layers[i].backward(&inputs[i], &delta, &mut grad.layers[i]);
            }
        }
        Ok(loss)
    }
}

pub fn train_mlp(x: &Matrix, labels: &[usize], cfg: &MlpConfig) -> Result<TrainedModel> {
    if x.rows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    if labels.len() != x.rows() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} rows but {} labels",
            x.rows(),
            labels.len()
        )));
    }
    if cfg.input_width != 0 && cfg.input_width != x.cols() {
        return Err(ModelError::ShapeMismatch(format!(
            "config expects width {}, data has {}",
            cfg.input_width,
            x.cols()
        )));
    }
    if cfg.output < 2 || cfg.batch_size == 0 || cfg.hidden.contains(&0) || !(cfg.lr > 0.0) {
        return Err(ModelError::InvalidConfig(format!("{cfg:?}")));
    }
    check_labels(labels, cfg.output)?;

    let mut widths = vec![x.cols()];
    widths.extend(&cfg.hidden);
    widths.push(cfg.output);
    let mut rng = Rng::new(cfg.seed);
    let mut net = MlpNet::init(&widths, &mut rng);
    let mut adam = AdamState::new(
        &net,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut grad = net.zeros_like();
    let mut final_loss = None;
    for _ in 0..cfg.epochs {
        let order = rng.permutation(x.rows());
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.fill_zero();
            for &i in batch {
                epoch_loss += net.accumulate_gradient(x.row(i), labels[i], &mut grad)?;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.visit_mut(&mut |t, _| t.iter_mut().for_each(|g| *g *= scale));
            adam.step(&mut net, &grad, 0.0)?;
        }
        final_loss = Some(epoch_loss / x.rows() as f64);
    }

    Ok(TrainedModel {
        meta: TrainingMeta {
            seed: cfg.seed,
            config_hash: config_hash(cfg),
            final_loss,
            input_width: x.cols(),
            num_classes: cfg.output,
        },
        params: ModelParams::Mlp(net),
    })
}

/// Softmax over the network's output for one row.
pub fn predict_mlp(model: &TrainedModel, x: &[f64]) -> Result<Vec<f64>> {
    match model.params {
        ModelParams::Mlp(_) => model.predict_proba(x),
        _ => Err(ModelError::Unsupported {
            model: model.kind().as_str(),
            operation: "predict_mlp",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, dim: usize, spread: f64, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 4;
            rows.push(
                (0..dim)
                    .map(|d| if d % 4 == c { 3.0 } else { 0.0 } + spread * rng.standard_normal())
                    .collect::<Vec<_>>(),
            );
            labels.push(c);
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn parameter_count_for_gaze_input() {
        let net = MlpNet::init(&[24, 64, 32, 4], &mut Rng::new(0));
        assert_eq!(net.num_params(), 3812);
    }

    #[test]
    fn fresh_model_is_uniform_at_zero_input() {
        let (x, y) = blobs(40, 24, 0.5, 1);
        let cfg = MlpConfig {
            epochs: 0,
            ..MlpConfig::default()
        };
        let model = train_mlp(&x, &y, &cfg).unwrap();
        let p = predict_mlp(&model, &[0.0; 24]).unwrap();
        assert!(p.iter().all(|v| (v - 0.25).abs() <= 0.1));
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (x, y) = blobs(500, 24, 1.0, 2);
        let (xt, yt) = blobs(200, 24, 1.0, 3);
        let model = train_mlp(&x, &y, &MlpConfig::default()).unwrap();
        let pred = model.predict_classes(&xt).unwrap();
        let acc = pred.iter().zip(&yt).filter(|(a, b)| a == b).count() as f64 / yt.len() as f64;
        assert!(acc >= 0.95, "held-out accuracy {acc}");
        // a training point of a separable set comes back with its own label
        let p = predict_mlp(&model, x.row(0)).unwrap();
        assert_eq!(super::super::argmax(&p), y[0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = blobs(64, 6, 1.0, 4);
        let cfg = MlpConfig {
            epochs: 3,
            seed: 9,
            ..MlpConfig::default()
        };
        let a = train_mlp(&x, &y, &cfg).unwrap();
        let b = train_mlp(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        let (x, y) = blobs(8, 3, 1.0, 5);
        assert_eq!(
            train_mlp(&Matrix::zeros(0, 3), &[], &MlpConfig::default()),
            Err(ModelError::EmptyTrainingSet)
        );
        let wrong = MlpConfig {
            input_width: 4,
            ..MlpConfig::default()
        };
        assert!(matches!(train_mlp(&x, &y, &wrong), Err(ModelError::ShapeMismatch(_))));
        let model = train_mlp(&x, &y, &MlpConfig { epochs: 1, ..MlpConfig::default() }).unwrap();
        assert!(matches!(predict_mlp(&model, &[1.0]), Err(ModelError::ShapeMismatch(_))));
    }
}
