//! Stacked LSTM direction classifier trained by backpropagation through time.
//!
//! Inter-layer outputs pass through ReLU before feeding the next layer; the
//! head is a dense softmax layer on the top layer's hidden state.
//!
//! Two data regimes:
//! * `Windowed`: sliding windows of `window_len` consecutive rows (stride 1),
//!   one prediction from the final timestep. A window belongs to the
//!   training or held-out side according to its last row.
//! * `FullSequence`: one pass over each whole participant sequence with a
//!   prediction at every timestep; the loss only sees training timesteps.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{argmax, check_labels, config_hash, ModelError, ModelParams, Result, TrainedModel, TrainingMeta};
use crate::numcore::{
    relu, softmax, softmax_cross_entropy, AdamConfig, AdamState, DenseLayer, LstmCell, LstmStepCache,
    Matrix, Parameters, Rng,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LstmMode {
    Windowed,
    FullSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LstmConfig {
    /// Expected input width; 0 takes the width of the training sequences.
    pub input_width: usize,
    pub hidden_layers: usize,
    pub hidden_size: usize,
    pub output: usize,
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub window_len: usize,
    pub mode: LstmMode,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            input_width: 0,
            hidden_layers: 2,
            hidden_size: 50,
            output: 2,
            l2: 0.01,
            lr: 0.001,
            epochs: 50,
            batch_size: 32,
            window_len: 5,
            mode: LstmMode::Windowed,
            seed: 0,
        }
    }
}

/// One participant-task in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    /// `T × F`
    pub steps: Matrix,
    pub label: usize,
    /// Which timesteps belong to the training partition.
    pub train_mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet {
    pub cells: Vec<LstmCell>,
    pub head: DenseLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub net: LstmNet,
    pub window_len: usize,
    pub mode: LstmMode,
}

impl Parameters for LstmNet {
    fn visit(&self, f: &mut dyn FnMut(&[f64], bool)) {
        self.cells.as_slice().visit(f);
        self.head.visit(f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64], bool)) {
        self.cells.as_mut_slice().visit_mut(f);
        self.head.visit_mut(f);
    }
}

/// Start..end ranges of every length-`window` stretch of a `len`-step
/// sequence, stride 1.
pub fn sliding_windows(len: usize, window: usize) -> Result<Vec<Range<usize>>> {
    if window == 0 || len < window {
        return Err(ModelError::SequenceTooShort { len, window });
    }
    Ok((0..=len - window).map(|s| s..s + window).collect())
}

impl LstmNet {
    pub fn init(input: usize, hidden: usize, layers: usize, output: usize, rng: &mut Rng) -> Self {
        let cells = (0..layers)
            .map(|l| LstmCell::init(if l == 0 { input } else { hidden }, hidden, rng))
            .collect();
        let head = DenseLayer::init(hidden, output, rng);
        Self { cells, head }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    pub fn input_width(&self) -> usize {
        self.cells[0].input
    }

    /// Runs the stack over `rows`, keeping every step's cache, indexed
    /// `[layer][t]`.
    pub fn forward(&self, rows: &[&[f64]]) -> Vec<Vec<LstmStepCache>> {
        let mut caches: Vec<Vec<LstmStepCache>> = Vec::with_capacity(self.cells.len());
        for (l, cell) in self.cells.iter().enumerate() {
            let mut h = vec![0.0; cell.hidden];
            let mut c = vec![0.0; cell.hidden];
            let mut layer = Vec::with_capacity(rows.len());
            for (t, row) in rows.iter().enumerate() {
                let step = if l == 0 {
                    cell.step_unchecked(row, &h, &c)
                } else {
                    cell.step_unchecked(&relu(&caches[l - 1][t].h), &h, &c)
                };
                h.clone_from(&step.h);
                c.clone_from(&step.c);
                layer.push(step);
            }
            caches.push(layer);
        }
        caches
    }

    pub fn head_logits(&self, top_h: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.head.output_width()];
        self.head.forward_into(top_h, &mut z);
        z
    }

    /// Summed cross-entropy over `targets` (timestep, class); gradients are
    /// added into `grad`.
    pub fn accumulate_gradient(
        &self,
        rows: &[&[f64]],
        targets: &[(usize, usize)],
        grad: &mut LstmNet,
    ) -> Result<f64> {
        let caches = self.forward(rows);
        let top = self.cells.len() - 1;
        let steps = rows.len();
        let mut loss = 0.0;
        let mut dh_above = vec![vec![0.0; self.cells[top].hidden]; steps];
        for &(t, class) in targets {
            let logits = self.head_logits(&caches[top][t].h);
            let (l, dlogits) = softmax_cross_entropy(&logits, class)?;
            loss += l;
            let dh = self.head.backward(&caches[top][t].h, &dlogits, &mut grad.head);
            for (a, d) in dh_above[t].iter_mut().zip(dh) {
                *a += d;
            }
        }
        let last_needed = targets.iter().map(|&(t, _)| t).max().unwrap_or(0);
        for l in (0..self.cells.len()).rev() {
            let cell = &self.cells[l];
            let mut dh_next = vec![0.0; cell.hidden];
            let mut dc_next = vec![0.0; cell.hidden];
            let mut dh_below = if l > 0 {
                vec![vec![0.0; self.cells[l - 1].hidden]; steps]
            } else {
                Vec::new()
            };
            // nothing after the last target receives gradient
            for t in (0..=last_needed).rev() {
                let dh: Vec<f64> = dh_above[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                let (dx, dh_prev, dc_prev) =
                    cell.backward_step(&caches[l][t], &dh, &dc_next, &mut grad.cells[l]);
                if l > 0 {
                    for ((out, d), &h) in dh_below[t].iter_mut().zip(dx).zip(&caches[l - 1][t].h) {
                        if h > 0.0 {
                            *out = d;
                        }
                    }
                }
                dh_next = dh_prev;
                dc_next = dc_prev;
            }
            dh_above = dh_below;
        }
        Ok(loss)
    }

    /// Probabilities at the final timestep.
    pub fn predict_last(&self, rows: &[&[f64]]) -> Vec<f64> {
        let caches = self.forward(rows);
        let top = caches.last().expect("at least one layer");
        softmax(&self.head_logits(&top.last().expect("non-empty sequence").h))
    }

    /// Probabilities at every timestep.
    pub fn predict_steps(&self, rows: &[&[f64]]) -> Vec<Vec<f64>> {
        let caches = self.forward(rows);
        let top = caches.last().expect("at least one layer");
        top.iter().map(|c| softmax(&self.head_logits(&c.h))).collect()
    }
}

fn rows_of(m: &Matrix, range: Range<usize>) -> Vec<&[f64]> {
    range.map(|r| m.row(r)).collect()
}

fn validate(seqs: &[Sequence], cfg: &LstmConfig) -> Result<usize> {
    let first = seqs.first().ok_or(ModelError::EmptyTrainingSet)?;
    let width = first.steps.cols();
    if cfg.input_width != 0 && cfg.input_width != width {
        return Err(ModelError::ShapeMismatch(format!(
            "config expects width {}, data has {width}",
            cfg.input_width
        )));
    }
    if cfg.hidden_layers == 0 || cfg.hidden_size == 0 || cfg.output < 2 || cfg.batch_size == 0 {
        return Err(ModelError::InvalidConfig(format!("{cfg:?}")));
    }
    if !(cfg.lr > 0.0) || !(cfg.l2 >= 0.0) {
        return Err(ModelError::InvalidConfig("lr must be positive and l2 non-negative".into()));
    }
    if cfg.mode == LstmMode::Windowed && cfg.window_len < 2 {
        return Err(ModelError::InvalidConfig("window_len must be at least 2".into()));
    }
    for s in seqs {
        if s.steps.cols() != width {
            return Err(ModelError::ShapeMismatch(format!(
                "sequence width {} differs from {width}",
                s.steps.cols()
            )));
        }
        if s.train_mask.len() != s.steps.rows() {
            return Err(ModelError::ShapeMismatch(format!(
                "mask has {} entries for {} steps",
                s.train_mask.len(),
                s.steps.rows()
            )));
        }
        if cfg.mode == LstmMode::Windowed && s.steps.rows() < cfg.window_len {
            return Err(ModelError::SequenceTooShort {
                len: s.steps.rows(),
                window: cfg.window_len,
            });
        }
        if s.steps.rows() == 0 {
            return Err(ModelError::SequenceTooShort { len: 0, window: 1 });
        }
    }
    check_labels(&seqs.iter().map(|s| s.label).collect::<Vec<_>>(), cfg.output)?;
    Ok(width)
}

/// A unit of training work: rows of one sequence plus loss targets.
struct Example {
    seq: usize,
    rows: Range<usize>,
    targets: Vec<(usize, usize)>,
}

fn training_examples(seqs: &[Sequence], cfg: &LstmConfig) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for (i, s) in seqs.iter().enumerate() {
        match cfg.mode {
            LstmMode::Windowed => {
                for w in sliding_windows(s.steps.rows(), cfg.window_len)? {
                    if s.train_mask[w.end - 1] {
                        out.push(Example {
                            seq: i,
                            targets: vec![(w.len() - 1, s.label)],
                            rows: w,
                        });
                    }
                }
            }
            LstmMode::FullSequence => {
                let targets: Vec<_> = (0..s.steps.rows())
                    .filter(|&t| s.train_mask[t])
                    .map(|t| (t, s.label))
                    .collect();
                if !targets.is_empty() {
                    out.push(Example {
                        seq: i,
                        rows: 0..s.steps.rows(),
                        targets,
                    });
                }
            }
        }
    }
    Ok(out)
}

pub fn train_lstm(seqs: &[Sequence], cfg: &LstmConfig) -> Result<TrainedModel> {
    let width = validate(seqs, cfg)?;
    let examples = training_examples(seqs, cfg)?;
    if examples.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut rng = Rng::new(cfg.seed);
    let mut net = LstmNet::init(width, cfg.hidden_size, cfg.hidden_layers, cfg.output, &mut rng);
    let mut adam = AdamState::new(
        &net,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut grad = net.zeros_like();
    let total_targets: usize = examples.iter().map(|e| e.targets.len()).sum();
    let mut final_loss = None;
    for _ in 0..cfg.epochs {
        let order = rng.permutation(examples.len());
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.fill_zero();
            let mut count = 0;
            for &e in batch {
                let ex = &examples[e];
                let rows = rows_of(&seqs[ex.seq].steps, ex.rows.clone());
                epoch_loss += net.accumulate_gradient(&rows, &ex.targets, &mut grad)?;
                count += ex.targets.len();
            }
            let scale = 1.0 / count as f64;
            grad.visit_mut(&mut |t, _| t.iter_mut().for_each(|g| *g *= scale));
            adam.step(&mut net, &grad, cfg.l2)?;
        }
        final_loss = Some(epoch_loss / total_targets as f64);
    }
    Ok(TrainedModel {
        meta: TrainingMeta {
            seed: cfg.seed,
            config_hash: config_hash(cfg),
            final_loss,
            input_width: width,
            num_classes: cfg.output,
        },
        params: ModelParams::Lstm(LstmModel {
            net,
            window_len: cfg.window_len,
            mode: cfg.mode,
        }),
    })
}

fn lstm_of(model: &TrainedModel) -> Result<&LstmModel> {
    match &model.params {
        ModelParams::Lstm(m) => Ok(m),
        _ => Err(ModelError::Unsupported {
            model: model.kind().as_str(),
            operation: "sequence prediction",
        }),
    }
}

/// Class probabilities from the final timestep of `window`.
pub fn predict_lstm(model: &TrainedModel, window: &Matrix) -> Result<Vec<f64>> {
    let m = lstm_of(model)?;
    if window.cols() != model.meta.input_width {
        return Err(ModelError::ShapeMismatch(format!(
            "lstm trained on width {}, got {}",
            model.meta.input_width,
            window.cols()
        )));
    }
    if window.rows() == 0 || (m.mode == LstmMode::Windowed && window.rows() != m.window_len) {
        return Err(ModelError::ShapeMismatch(format!(
            "window has {} steps, model expects {}",
            window.rows(),
            m.window_len
        )));
    }
    Ok(m.net.predict_last(&rows_of(window, 0..window.rows())))
}

/// Class probabilities at every timestep of a full sequence.
pub fn predict_lstm_steps(model: &TrainedModel, seq: &Matrix) -> Result<Vec<Vec<f64>>> {
    let m = lstm_of(model)?;
    if seq.cols() != model.meta.input_width || seq.rows() == 0 {
        return Err(ModelError::ShapeMismatch(format!(
            "lstm trained on width {}, got {}x{}",
            model.meta.input_width,
            seq.rows(),
            seq.cols()
        )));
    }
    Ok(m.net.predict_steps(&rows_of(seq, 0..seq.rows())))
}

/// `(predictions, labels)` for every held-out unit: windows whose last row
/// is outside the training mask, or individual held-out timesteps in
/// full-sequence mode.
pub fn heldout_predictions(model: &TrainedModel, seqs: &[Sequence]) -> Result<(Vec<usize>, Vec<usize>)> {
    let m = lstm_of(model)?;
    let (mut preds, mut labels) = (Vec::new(), Vec::new());
    for s in seqs {
        if s.steps.cols() != model.meta.input_width {
            return Err(ModelError::ShapeMismatch(format!(
                "lstm trained on width {}, got {}",
                model.meta.input_width,
                s.steps.cols()
            )));
        }
        match m.mode {
            LstmMode::Windowed => {
                for w in sliding_windows(s.steps.rows(), m.window_len)? {
                    if !s.train_mask[w.end - 1] {
                        preds.push(argmax(&m.net.predict_last(&rows_of(&s.steps, w))));
                        labels.push(s.label);
                    }
                }
            }
            LstmMode::FullSequence => {
                let probs = m.net.predict_steps(&rows_of(&s.steps, 0..s.steps.rows()));
                for (t, p) in probs.iter().enumerate() {
                    if !s.train_mask[t] {
                        preds.push(argmax(p));
                        labels.push(s.label);
                    }
                }
            }
        }
    }
    Ok((preds, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direction encoded purely in temporal order: rising ramps are class 0,
    /// falling ramps class 1, with random level and noise.
    fn ramps(n: usize, len: usize, seed: u64, holdout_every: usize) -> Vec<Sequence> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let slope = if label == 0 { 0.1 } else { -0.1 };
                let level = rng.uniform_in(0.2, 0.8);
                let rows: Vec<Vec<f64>> = (0..len)
                    .map(|t| {
                        let v = level + slope * (t as f64 - len as f64 / 2.0) + 0.01 * rng.standard_normal();
                        vec![v, 0.5 + 0.1 * rng.standard_normal()]
                    })
                    .collect();
                Sequence {
                    steps: Matrix::from_rows(&rows).unwrap(),
                    label,
                    train_mask: (0..len).map(|t| holdout_every == 0 || t % holdout_every != 0).collect(),
                }
            })
            .collect()
    }

    #[test]
    fn bptt_matches_finite_differences() {
        use crate::numcore::grad_check;
        for seed in 0..3 {
            let mut rng = Rng::new(seed);
            let net = LstmNet::init(3, 4, 2, 2, &mut rng);
            let rows: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..3).map(|_| rng.standard_normal()).collect())
                .collect();
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            for targets in [vec![(2, 1)], vec![(0, 0), (1, 1), (2, 0)]] {
                let err = grad_check(
                    |p: &LstmNet| {
                        let mut g = p.zeros_like();
                        let loss = p.accumulate_gradient(&refs, &targets, &mut g).unwrap();
                        (loss, g)
                    },
                    &net,
                    1e-5,
                );
                assert!(err <= 1e-4, "seed {seed}: relative error {err}");
            }
        }
    }

    #[test]
    fn window_counts() {
        assert_eq!(sliding_windows(39, 5).unwrap().len(), 35);
        assert_eq!(
            sliding_windows(4, 5),
            Err(ModelError::SequenceTooShort { len: 4, window: 5 })
        );
    }

    #[test]
    fn short_sequences_are_rejected() {
        let seqs = ramps(4, 4, 1, 0);
        assert!(matches!(
            train_lstm(&seqs, &LstmConfig::default()),
            Err(ModelError::SequenceTooShort { len: 4, window: 5 })
        ));
    }

    #[test]
    fn probabilities_form_a_simplex() {
        let seqs = ramps(4, 10, 2, 3);
        let model = train_lstm(&seqs, &LstmConfig { epochs: 1, ..LstmConfig::default() }).unwrap();
        let window = seqs[0].steps.select_rows(&[0, 1, 2, 3, 4]);
        let p = predict_lstm(&model, &window).unwrap();
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let narrow = Matrix::zeros(5, 3);
        assert!(matches!(predict_lstm(&model, &narrow), Err(ModelError::ShapeMismatch(_))));
    }

    #[test]
    fn temporal_order_is_learned_and_reversal_flips_it() {
        let train = ramps(64, 12, 3, 0);
        let cfg = LstmConfig {
            epochs: 30,
            lr: 0.005,
            seed: 4,
            ..LstmConfig::default()
        };
        let model = train_lstm(&train, &cfg).unwrap();
        let test = ramps(20, 12, 5, 0);
        let (mut correct, mut flipped, mut total) = (0, 0, 0);
        for s in &test {
            for w in sliding_windows(12, 5).unwrap() {
                let idx: Vec<usize> = w.clone().collect();
                let forward = predict_lstm(&model, &s.steps.select_rows(&idx)).unwrap();
                let rev: Vec<usize> = w.rev().collect();
                let backward = predict_lstm(&model, &s.steps.select_rows(&rev)).unwrap();
                correct += usize::from(argmax(&forward) == s.label);
                flipped += usize::from(argmax(&forward) != argmax(&backward));
                total += 1;
            }
        }
        let acc = correct as f64 / total as f64;
        let flip = flipped as f64 / total as f64;
        assert!(acc >= 0.9, "held-out accuracy {acc}");
        assert!(flip >= 0.8, "reversal flipped {flip}");
    }

    #[test]
    fn full_sequence_mode_masks_the_loss() {
        let seqs = ramps(8, 12, 6, 4);
        let cfg = LstmConfig {
            mode: LstmMode::FullSequence,
            epochs: 2,
            ..LstmConfig::default()
        };
        let model = train_lstm(&seqs, &cfg).unwrap();
        let (preds, labels) = heldout_predictions(&model, &seqs).unwrap();
        // steps 0, 4, 8 of each sequence are held out
        assert_eq!(preds.len(), 8 * 3);
        assert_eq!(labels.len(), preds.len());
        let steps = predict_lstm_steps(&model, &seqs[0].steps).unwrap();
        assert_eq!(steps.len(), 12);
    }

    #[test]
    fn training_is_deterministic() {
        let seqs = ramps(6, 8, 7, 3);
        let cfg = LstmConfig { epochs: 2, seed: 11, ..LstmConfig::default() };
        assert_eq!(train_lstm(&seqs, &cfg).unwrap(), train_lstm(&seqs, &cfg).unwrap());
    }
}
