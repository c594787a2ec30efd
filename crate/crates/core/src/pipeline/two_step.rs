//! Per-shape preparation shared by the two-step run and the grid, and the
//! two-step run itself.
//!
//! For one shape: build the feature/gaze/raw tables, split window rows and
//! hit rows once, fit min-max scalers on training rows only, then train the
//! gaze MLP whose probabilities (for every row, unscaled) feed the setups
//! that include step-one output.

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, Metrics};
use super::split::{split_indices, Split, SplitSpec, Stratify};
use super::{GridModel, PipelineError, Result, Step};
use crate::dataset::{ParticipantRecord, Recording, TaskShape};
use crate::features::{assemble_setup, DataMatrix, FeatureOptions, RowLabel, Scaler, SetupId, SetupParts, ShapeTables};
use crate::models::{
    heldout_predictions, train_baseline, train_lstm, train_mlp, BaselineKind, LstmConfig, MlpConfig, Sequence,
    TrainedModel,
};
use crate::numcore::{derive_seed, stable_hash_hex, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmSettings {
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for SvmSettings {
    fn default() -> Self {
        match BaselineKind::LINEAR_SVM {
            BaselineKind::LinearSvm { lambda, epochs, lr } => Self { lambda, epochs, lr },
            _ => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticSettings {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for LogisticSettings {
    fn default() -> Self {
        match BaselineKind::LOGISTIC_REGRESSION {
            BaselineKind::LogisticRegression { lr, epochs, batch_size } => Self { lr, epochs, batch_size },
            _ => unreachable!(),
        }
    }
}

/// Hyperparameters of every model family. Seeds, input widths and class
/// counts inside `mlp` / `lstm` are overwritten per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    pub mlp: MlpConfig,
    pub lstm: LstmConfig,
    pub knn_k: usize,
    pub svm: SvmSettings,
    pub logistic: LogisticSettings,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            mlp: MlpConfig::default(),
            lstm: LstmConfig::default(),
            knn_k: 5,
            svm: SvmSettings::default(),
            logistic: LogisticSettings::default(),
        }
    }
}

impl ModelSettings {
    pub fn baseline(&self, model: GridModel) -> Option<BaselineKind> {
        match model {
            GridModel::Nn => None,
            GridModel::Knn => Some(BaselineKind::Knn { k: self.knn_k }),
            GridModel::Svm => Some(BaselineKind::LinearSvm {
                lambda: self.svm.lambda,
                epochs: self.svm.epochs,
                lr: self.svm.lr,
            }),
            GridModel::Lr => Some(BaselineKind::LogisticRegression {
                lr: self.logistic.lr,
                epochs: self.logistic.epochs,
                batch_size: self.logistic.batch_size,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub split: SplitSpec,
    pub models: ModelSettings,
    pub features: FeatureOptions,
    /// Input of the step-two LSTM in [`run_two_step`].
    pub direction_setup: SetupId,
    /// Draws behind each random-guess estimate.
    pub random_guess_draws: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            split: SplitSpec::default(),
            models: ModelSettings::default(),
            features: FeatureOptions::default(),
            direction_setup: SetupId::D6,
            random_guess_draws: 100_000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if self.random_guess_draws == 0 {
            return Err(PipelineError::InvalidConfig("random_guess_draws must be positive".into()));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        stable_hash_hex(serde_json::to_string(self).expect("plain data").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub root_seed: u64,
    pub split_seed: u64,
    pub step_one_seed: u64,
    pub step_two_seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub shape: TaskShape,
    pub setup: SetupId,
    pub step_one: Metrics,
    pub step_two: Metrics,
    pub provenance: Provenance,
}

/// Segments every recording of `shape` into participant records, in input
/// order.
pub fn participant_records(recordings: &[Recording], shape: TaskShape) -> Result<Vec<ParticipantRecord>> {
    recordings
        .iter()
        .filter(|r| r.shape == shape)
        .map(|r| {
            ParticipantRecord::from_recording(r).map_err(|source| PipelineError::Dataset {
                context: format!("participant {} ({shape})", r.participant_id),
                source,
            })
        })
        .collect()
}

pub(crate) fn cell_label(step: Step, model: GridModel, setup: SetupId, shape: TaskShape) -> String {
    format!("{step}/{model}/{setup}/{shape}")
}

pub(crate) fn cell_seed(root: u64, step: Step, model: GridModel, setup: SetupId, shape: TaskShape) -> u64 {
    derive_seed(root, &cell_label(step, model, setup, shape))
}

pub(crate) struct StepOne {
    pub seed: u64,
    pub metrics: Metrics,
    /// One row of four probabilities per window row.
    pub probs: Matrix,
}

/// Everything a cell of one shape needs, built once.
pub(crate) struct ShapeContext {
    pub shape: TaskShape,
    pub window_labels: Vec<RowLabel>,
    pub hit_labels: Vec<RowLabel>,
    pub window_split: Split,
    pub hit_split: Split,
    pub window_split_seed: u64,
    features: Matrix,
    gaze: Matrix,
    raw: Matrix,
    pub step_one: StepOne,
}

fn strata(labels: &[RowLabel], by: Stratify) -> Option<Vec<usize>> {
    match by {
        Stratify::None => None,
        Stratify::Segment => Some(labels.iter().map(|l| l.segment.index()).collect()),
        Stratify::Direction => Some(labels.iter().map(|l| l.direction.class_index()).collect()),
    }
}

fn scaled(m: &Matrix, train: &[usize], what: &str, shape: TaskShape) -> Result<Matrix> {
    let wrap = |source| PipelineError::Scale {
        context: format!("scaling {what} ({shape})"),
        source,
    };
    Scaler::fit_rows(m, train).map_err(wrap)?.apply(m).map_err(wrap)
}

impl ShapeContext {
    pub fn build(records: &[ParticipantRecord], cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        if records.len() < 2 {
            return Err(PipelineError::InvalidConfig(format!(
                "need at least 2 participants, got {}",
                records.len()
            )));
        }
        let shape = records[0].shape;
        let tables = ShapeTables::build(records, cfg.features).map_err(|source| PipelineError::Setup {
            context: format!("building {shape} tables"),
            source,
        })?;
        let window_split_seed = derive_seed(cfg.seed, &format!("split/{shape}/windows"));
        let window_split = split_indices(
            tables.window_labels.len(),
            strata(&tables.window_labels, cfg.split.stratify_by).as_deref(),
            &cfg.split,
            window_split_seed,
        )?;
        let hit_split = split_indices(
            tables.hit_labels.len(),
            strata(&tables.hit_labels, cfg.split.stratify_by).as_deref(),
            &cfg.split,
            derive_seed(cfg.seed, &format!("split/{shape}/hits")),
        )?;
        let features = scaled(&tables.features, &window_split.train, "features", shape)?;
        let gaze = scaled(&tables.gaze, &window_split.train, "gaze", shape)?;
        let raw = scaled(&tables.raw, &hit_split.train, "raw resistance", shape)?;

        // step one: gaze MLP on the training windows, probabilities for all
        let seed = cell_seed(cfg.seed, Step::Segment, GridModel::Nn, SetupId::D3, shape);
        let segments: Vec<usize> = tables.window_labels.iter().map(|l| l.segment.index()).collect();
        let model = fit_mlp(&gaze, &segments, &window_split, cfg, seed)
            .map_err(|source| PipelineError::Model {
                context: format!("step one ({shape})"),
                source,
            })?;
        let metrics = score_rows(&model, &gaze, &segments, &window_split, Step::Segment, &format!("step one ({shape})"))?;
        let probs = Matrix::from_rows(
            &gaze
                .iter_rows()
                .map(|r| model.predict_proba(r))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|source| PipelineError::Model {
                    context: format!("step one ({shape})"),
                    source,
                })?,
        )
        .expect("uniform probability rows");

        Ok(Self {
            shape,
            window_labels: tables.window_labels,
            hit_labels: tables.hit_labels,
            window_split,
            hit_split,
            window_split_seed,
            features,
            gaze,
            raw,
            step_one: StepOne { seed, metrics, probs },
        })
    }

    pub fn assemble(&self, setup: SetupId) -> Result<DataMatrix> {
        let parts = SetupParts {
            features: Some(&self.features),
            gaze: Some(&self.gaze),
            probs: Some(&self.step_one.probs),
            raw: Some(&self.raw),
            window_labels: &self.window_labels,
            hit_labels: &self.hit_labels,
        };
        assemble_setup(setup, &parts).map_err(|source| PipelineError::Setup {
            context: format!("assembling {setup} ({})", self.shape),
            source,
        })
    }

    pub fn split_for(&self, setup: SetupId) -> &Split {
        if setup.is_per_hit() {
            &self.hit_split
        } else {
            &self.window_split
        }
    }

    /// Trains and scores one grid cell.
    pub fn run_cell(&self, step: Step, model: GridModel, setup: SetupId, cfg: &PipelineConfig, seed: u64) -> Result<Metrics> {
        let context = cell_label(step, model, setup, self.shape);
        let data = self.assemble(setup)?;
        let split = self.split_for(setup);
        let labels = match step {
            Step::Segment => data.segment_classes(),
            Step::Direction => data.direction_classes(),
        };
        let wrap = |source| PipelineError::Model {
            context: context.clone(),
            source,
        };
        match (model, step) {
            (GridModel::Nn, Step::Segment) => {
                let m = fit_mlp(&data.x, &labels, split, cfg, seed).map_err(wrap)?;
                score_rows(&m, &data.x, &labels, split, step, &context)
            }
            (GridModel::Nn, Step::Direction) => {
                let seqs = sequences(&data, &labels, split);
                let lstm = LstmConfig {
                    input_width: 0,
                    output: step.num_classes(),
                    seed,
                    ..cfg.models.lstm.clone()
                };
                let m = train_lstm(&seqs, &lstm).map_err(wrap)?;
                let (pred, truth) = heldout_predictions(&m, &seqs).map_err(wrap)?;
                evaluate(&pred, &truth, step.num_classes())
            }
            (baseline, _) => {
                let kind = cfg.models.baseline(baseline).expect("not nn");
                let x = data.x.select_rows(&split.train);
                let y: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
                let m = train_baseline(kind, &x, &y, step.num_classes(), seed).map_err(wrap)?;
                score_rows(&m, &data.x, &labels, split, step, &context)
            }
        }
    }
}

fn fit_mlp(
    x: &Matrix,
    labels: &[usize],
    split: &Split,
    cfg: &PipelineConfig,
    seed: u64,
) -> std::result::Result<TrainedModel, crate::models::ModelError> {
    let mlp = MlpConfig {
        input_width: 0,
        output: Step::Segment.num_classes(),
        seed,
        ..cfg.models.mlp.clone()
    };
    let y: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    train_mlp(&x.select_rows(&split.train), &y, &mlp)
}

fn score_rows(
    model: &TrainedModel,
    x: &Matrix,
    labels: &[usize],
    split: &Split,
    step: Step,
    context: &str,
) -> Result<Metrics> {
    let pred = model
        .predict_classes(&x.select_rows(&split.test))
        .map_err(|source| PipelineError::Model {
            context: context.to_string(),
            source,
        })?;
    let truth: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
    evaluate(&pred, &truth, step.num_classes())
}

/// One sequence per participant, rows in hit order, with the split as mask.
fn sequences(data: &DataMatrix, labels: &[usize], split: &Split) -> Vec<Sequence> {
    let mask = split.train_mask();
    data.sequences()
        .into_iter()
        .map(|r| Sequence {
            steps: data.x.select_rows(&r.clone().collect::<Vec<_>>()),
            label: labels[r.start],
            train_mask: mask[r].to_vec(),
        })
        .collect()
}

/// Step one (gaze MLP → segment probabilities) then step two (LSTM on
/// `cfg.direction_setup`) for the records of a single shape.
///
/// Both steps share one window partition, so no step-two test row was seen
/// by the step-one model during training.
pub fn run_two_step(records: &[ParticipantRecord], cfg: &PipelineConfig) -> Result<PipelineResult> {
    if let Some(first) = records.first() {
        if let Some(other) = records.iter().find(|r| r.shape != first.shape) {
            return Err(PipelineError::InvalidConfig(format!(
                "two-step run needs a single shape, got {} and {}",
                first.shape, other.shape
            )));
        }
    }
    let ctx = ShapeContext::build(records, cfg)?;
    let setup = cfg.direction_setup;
    let step_two_seed = cell_seed(cfg.seed, Step::Direction, GridModel::Nn, setup, ctx.shape);
    let step_two = ctx.run_cell(Step::Direction, GridModel::Nn, setup, cfg, step_two_seed)?;
    Ok(PipelineResult {
        shape: ctx.shape,
        setup,
        step_one: ctx.step_one.metrics.clone(),
        step_two,
        provenance: Provenance {
            root_seed: cfg.seed,
            split_seed: ctx.window_split_seed,
            step_one_seed: ctx.step_one.seed,
            step_two_seed,
            config_hash: cfg.config_hash(),
        },
    })
}
