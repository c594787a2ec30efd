//! Splitting, metrics, the two-step run, the experiment grid and reports.
//!
//! One root seed drives everything. Per-purpose seeds are derived from it
//! by label (`split/<shape>/windows`, `<step>/<model>/<setup>/<shape>`, ...),
//! so adding or removing cells never changes the seeds of the others.

mod grid;
mod metrics;
mod report;
mod split;
mod two_step;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::features::{ScaleError, SetupError};
use crate::models::ModelError;

pub use grid::{
    random_guess_metrics, run_grid, standard_cells, CellRequest, ExperimentCell, GridSelection,
    RandomGuessEntry, ReportTables, StepOneSummary,
};
pub use metrics::{evaluate, Metrics};
pub use report::{
    format_cell, reference_comparison, render_reference_comparison, render_report, write_outputs, ClaimCheck,
    ReportFormat, RunProvenance,
};
pub use split::{split_dataset, split_indices, Split, SplitSpec, Stratify, MIN_SPLIT_ROWS};
pub use two_step::{
    participant_records, run_two_step, LogisticSettings, ModelSettings, PipelineConfig, PipelineResult,
    Provenance, SvmSettings,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{rows} rows cannot be split, need at least {min}")]
    TooFewRows { rows: usize, min: usize },
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("class {class} outside 0..{num_classes}")]
    ClassOutOfRange { class: usize, num_classes: usize },
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("invalid cell: {0}")]
    InvalidCell(String),
    #[error("incomplete table: {0}")]
    IncompleteTable(String),
    #[error("{context}: {source}")]
    Dataset {
        context: String,
        #[source]
        source: DatasetError,
    },
    #[error("{context}: {source}")]
    Setup {
        context: String,
        #[source]
        source: SetupError,
    },
    #[error("{context}: {source}")]
    Scale {
        context: String,
        #[source]
        source: ScaleError,
    },
    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: ModelError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Which prediction problem a cell belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Segment,
    Direction,
}

impl Step {
    pub const ALL: [Step; 2] = [Step::Segment, Step::Direction];

    pub fn as_str(self) -> &'static str {
        match self {
            Step::Segment => "segment",
            Step::Direction => "direction",
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            Step::Segment => crate::dataset::NUM_SEGMENTS,
            Step::Direction => 2,
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Model family of a grid cell. `Nn` is the segment MLP on the segment
/// step and the LSTM on the direction step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridModel {
    Nn,
    Knn,
    Svm,
    Lr,
}

impl GridModel {
    pub const ALL: [GridModel; 4] = [GridModel::Nn, GridModel::Knn, GridModel::Svm, GridModel::Lr];

    pub fn as_str(self) -> &'static str {
        match self {
            GridModel::Nn => "nn",
            GridModel::Knn => "knn",
            GridModel::Svm => "svm",
            GridModel::Lr => "lr",
        }
    }

    /// Column/row heading used in rendered tables.
    pub fn label(self, step: Step) -> &'static str {
        match (self, step) {
            (GridModel::Nn, Step::Segment) => "NN",
            (GridModel::Nn, Step::Direction) => "LSTM",
            (GridModel::Knn, _) => "KNN",
            (GridModel::Svm, _) => "SVM",
            (GridModel::Lr, _) => "LR",
        }
    }
}

impl fmt::Display for GridModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GridModel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nn" | "mlp" | "lstm" => Ok(GridModel::Nn),
            "knn" => Ok(GridModel::Knn),
            "svm" => Ok(GridModel::Svm),
            "lr" => Ok(GridModel::Lr),
            _ => Err(format!("unknown model {s:?}")),
        }
    }
}
