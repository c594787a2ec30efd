//! The (step × model × setup × shape) experiment grid.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, Metrics};
use super::two_step::{cell_label, cell_seed, PipelineConfig, ShapeContext};
use super::{GridModel, PipelineError, Result, Step};
use crate::dataset::{ParticipantRecord, TaskShape};
use crate::features::SetupId;
use crate::numcore::{derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSelection {
    Segment,
    Direction,
    #[default]
    All,
}

impl GridSelection {
    pub fn steps(self) -> &'static [Step] {
        match self {
            GridSelection::Segment => &[Step::Segment],
            GridSelection::Direction => &[Step::Direction],
            GridSelection::All => &Step::ALL,
        }
    }
}

impl std::str::FromStr for GridSelection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "segment" => Ok(GridSelection::Segment),
            "direction" => Ok(GridSelection::Direction),
            "all" => Ok(GridSelection::All),
            _ => Err(format!("unknown grid {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellRequest {
    pub step: Step,
    pub model: GridModel,
    pub setup: SetupId,
    pub shape: TaskShape,
}

impl CellRequest {
    pub fn validate(&self) -> Result<()> {
        if self.step == Step::Segment && !SetupId::SEGMENT.contains(&self.setup) {
            return Err(PipelineError::InvalidCell(format!(
                "segment step cannot use {} (allowed: D1, D2, D3, D5)",
                self.setup
            )));
        }
        Ok(())
    }
}

/// Every model on every setup the step allows, for each shape: 4 × 4 per
/// shape for segments, 4 × 8 per shape for direction.
pub fn standard_cells(selection: GridSelection, shapes: &[TaskShape]) -> Vec<CellRequest> {
    let mut out = Vec::new();
    for &step in selection.steps() {
        let setups: &[SetupId] = match step {
            Step::Segment => &SetupId::SEGMENT,
            Step::Direction => &SetupId::ALL,
        };
        for &shape in shapes {
            for &setup in setups {
                for model in GridModel::ALL {
                    out.push(CellRequest { step, model, setup, shape });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub step: Step,
    pub model: GridModel,
    pub setup: SetupId,
    pub shape: TaskShape,
    pub metrics: Metrics,
    pub seed: u64,
    /// Excluded from equality-sensitive outputs; recorded in provenance only.
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomGuessEntry {
    pub step: Step,
    pub shape: TaskShape,
    pub metrics: Metrics,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOneSummary {
    pub shape: TaskShape,
    pub seed: u64,
    pub split_seed: u64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTables {
    pub root_seed: u64,
    pub config_hash: String,
    pub cells: Vec<ExperimentCell>,
    pub random_guess: Vec<RandomGuessEntry>,
    pub step_one: Vec<StepOneSummary>,
}

impl ReportTables {
    pub fn cell(&self, step: Step, model: GridModel, setup: SetupId, shape: TaskShape) -> Option<&ExperimentCell> {
        self.cells
            .iter()
            .find(|c| c.step == step && c.model == model && c.setup == setup && c.shape == shape)
    }
}

/// Uniform guesses scored against truths drawn from `labels`.
///
/// Uses the same draw sequence as
/// [`random_guess_accuracy`](crate::models::random_guess_accuracy), so the
/// accuracies agree for equal seeds.
pub fn random_guess_metrics(labels: &[usize], num_classes: usize, draws: usize, seed: u64) -> Result<Metrics> {
    if labels.is_empty() || draws == 0 {
        return Err(PipelineError::EmptyEvaluation);
    }
    let mut rng = Rng::new(seed);
    let mut truth = Vec::with_capacity(draws);
    let mut guess = Vec::with_capacity(draws);
    for _ in 0..draws {
        truth.push(labels[rng.below(labels.len())]);
        guess.push(rng.below(num_classes));
    }
    evaluate(&guess, &truth, num_classes)
}

/// Trains and evaluates every requested cell.
///
/// Records may mix shapes; each shape's tables, split and step-one model are
/// built once and shared by its cells. Cells run in parallel and come back in
/// request order. One random-guess entry is added per (step, shape) present.
pub fn run_grid(records: &[ParticipantRecord], requests: &[CellRequest], cfg: &PipelineConfig) -> Result<ReportTables> {
    cfg.validate()?;
    for r in requests {
        r.validate()?;
    }
    let mut by_shape: BTreeMap<TaskShape, Vec<ParticipantRecord>> = BTreeMap::new();
    for rec in records {
        by_shape.entry(rec.shape).or_default().push(rec.clone());
    }
    let mut contexts: BTreeMap<TaskShape, ShapeContext> = BTreeMap::new();
    for shape in TaskShape::ALL {
        if !requests.iter().any(|r| r.shape == shape) {
            continue;
        }
        let recs = by_shape
            .get(&shape)
            .ok_or_else(|| PipelineError::InvalidCell(format!("no {shape} recordings in the data")))?;
        contexts.insert(shape, ShapeContext::build(recs, cfg)?);
    }

    let cells = requests
        .par_iter()
        .map(|r| {
            let ctx = &contexts[&r.shape];
            let seed = cell_seed(cfg.seed, r.step, r.model, r.setup, r.shape);
            let start = Instant::now();
            let metrics = ctx.run_cell(r.step, r.model, r.setup, cfg, seed)?;
            Ok(ExperimentCell {
                step: r.step,
                model: r.model,
                setup: r.setup,
                shape: r.shape,
                metrics,
                seed,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut random_guess = Vec::new();
    for step in Step::ALL {
        for (&shape, ctx) in &contexts {
            if !requests.iter().any(|r| r.step == step && r.shape == shape) {
                continue;
            }
            let labels: Vec<usize> = ctx
                .window_labels
                .iter()
                .map(|l| match step {
                    Step::Segment => l.segment.index(),
                    Step::Direction => l.direction.class_index(),
                })
                .collect();
            let seed = derive_seed(cfg.seed, &format!("random-guess/{step}/{shape}"));
            random_guess.push(RandomGuessEntry {
                step,
                shape,
                metrics: random_guess_metrics(&labels, step.num_classes(), cfg.random_guess_draws, seed)?,
                seed,
            });
        }
    }

    let step_one = contexts
        .values()
        .map(|ctx| StepOneSummary {
            shape: ctx.shape,
            seed: ctx.step_one.seed,
            split_seed: ctx.window_split_seed,
            metrics: ctx.step_one.metrics.clone(),
        })
        .collect();

    Ok(ReportTables {
        root_seed: cfg.seed,
        config_hash: cfg.config_hash(),
        cells,
        random_guess,
        step_one,
    })
}

/// `step/model/setup/shape`, also the seed-derivation label of the cell.
pub(crate) fn label_of(c: &ExperimentCell) -> String {
    cell_label(c.step, c.model, c.setup, c.shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_participant, Direction, SynthConfig};
    use crate::models::random_guess_accuracy;

    #[test]
    fn standard_grid_sizes() {
        let both = TaskShape::ALL;
        assert_eq!(standard_cells(GridSelection::Segment, &both).len(), 32);
        assert_eq!(standard_cells(GridSelection::Direction, &both).len(), 64);
        assert_eq!(standard_cells(GridSelection::All, &[TaskShape::Circle]).len(), 48);
    }

    #[test]
    fn segment_cells_reject_step_one_setups() {
        let bad = CellRequest {
            step: Step::Segment,
            model: GridModel::Nn,
            setup: SetupId::D6,
            shape: TaskShape::Diamond,
        };
        assert!(matches!(bad.validate(), Err(PipelineError::InvalidCell(_))));
        assert!(matches!(
            run_grid(&[], &[bad], &PipelineConfig::default()),
            Err(PipelineError::InvalidCell(_))
        ));
    }

    #[test]
    fn random_guess_agrees_with_model_estimate() {
        let labels: Vec<usize> = (0..624).map(|i| (i / 10) % 4).collect();
        let m = random_guess_metrics(&labels, 4, 100_000, 5).unwrap();
        assert_eq!(m.accuracy, random_guess_accuracy(&labels, 4, 100_000, 5).unwrap());
        assert!((m.accuracy - 25.0).abs() <= 1.0);
    }

    #[test]
    fn small_grid_runs_and_is_deterministic() {
        let recs: Vec<ParticipantRecord> = (0..4)
            .map(|i| {
                let dir = if i < 2 { Direction::Clockwise } else { Direction::Counterclockwise };
                synth_participant(i, TaskShape::Circle, dir, &SynthConfig::default()).unwrap()
            })
            .collect();
        let mut cfg = PipelineConfig::default();
        cfg.models.mlp.epochs = 3;
        cfg.models.lstm.epochs = 1;
        cfg.models.lstm.hidden_size = 6;
        cfg.models.svm.epochs = 5;
        cfg.random_guess_draws = 1000;
        let req: Vec<CellRequest> = standard_cells(GridSelection::All, &[TaskShape::Circle])
            .into_iter()
            .filter(|r| matches!(r.setup, SetupId::D1 | SetupId::D6))
            .collect();
        let a = run_grid(&recs, &req, &cfg).unwrap();
        assert_eq!(a.cells.len(), req.len());
        assert_eq!(a.random_guess.len(), 2);
        let b = run_grid(&recs, &req, &cfg).unwrap();
        let strip = |t: &ReportTables| serde_json::to_string(t).unwrap();
        assert_eq!(strip(&a), strip(&b));
        let diamond = CellRequest {
            shape: TaskShape::Diamond,
            ..req[0]
        };
        assert!(matches!(run_grid(&recs, &[diamond], &cfg), Err(PipelineError::InvalidCell(_))));
    }
}
