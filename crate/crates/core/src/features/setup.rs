//! Per-shape feature tables and the eight data setups.
//!
//! | setup | parts                        | width (G = 24) |
//! |-------|------------------------------|----------------|
//! | D1    | raw resistance at each hit   | 1              |
//! | D2    | time-domain features         | 11             |
//! | D3    | gaze                         | G              |
//! | D4    | step-one probabilities       | 4              |
//! | D5    | D2 + D3                      | 35             |
//! | D6    | D2 + D4                      | 15             |
//! | D7    | D3 + D4                      | 28             |
//! | D8    | D2 + D3 + D4                 | 39             |
//!
//! D1 has one row per hit (40 per participant); every other setup has one
//! row per window (39 per participant), labelled by the window's destination
//! hit. Parts are always concatenated as features | gaze | probabilities.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{extract_feature_vector_with, FeatureError, FeatureKind, FeatureOptions, NUM_FEATURES};
use crate::dataset::{
    assign_segment_label, Direction, ParticipantRecord, SegmentLabel, TaskShape, NUM_SEGMENTS,
};
use crate::numcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetupId {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
    D7,
    D8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetupPart {
    Raw,
    Features,
    Gaze,
    Probs,
}

impl fmt::Display for SetupPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetupPart::Raw => "raw resistance",
            SetupPart::Features => "time-domain features",
            SetupPart::Gaze => "gaze",
            SetupPart::Probs => "step-one probabilities",
        })
    }
}

impl SetupId {
    pub const ALL: [SetupId; 8] = [
        SetupId::D1,
        SetupId::D2,
        SetupId::D3,
        SetupId::D4,
        SetupId::D5,
        SetupId::D6,
        SetupId::D7,
        SetupId::D8,
    ];

    /// Setups usable by the segment step (no step-one output).
    pub const SEGMENT: [SetupId; 4] = [SetupId::D1, SetupId::D2, SetupId::D3, SetupId::D5];

    pub fn parts(self) -> &'static [SetupPart] {
        use SetupPart::*;
        match self {
            SetupId::D1 => &[Raw],
            SetupId::D2 => &[Features],
            SetupId::D3 => &[Gaze],
            SetupId::D4 => &[Probs],
            SetupId::D5 => &[Features, Gaze],
            SetupId::D6 => &[Features, Probs],
            SetupId::D7 => &[Gaze, Probs],
            SetupId::D8 => &[Features, Gaze, Probs],
        }
    }

    pub fn width(self, gaze_width: usize) -> usize {
        self.parts()
            .iter()
            .map(|p| match p {
                SetupPart::Raw => 1,
                SetupPart::Features => NUM_FEATURES,
                SetupPart::Gaze => gaze_width,
                SetupPart::Probs => NUM_SEGMENTS,
            })
            .sum()
    }

    pub fn uses_step_one(self) -> bool {
        self.parts().contains(&SetupPart::Probs)
    }

    pub fn is_per_hit(self) -> bool {
        self == SetupId::D1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SetupId::D1 => "D1",
            SetupId::D2 => "D2",
            SetupId::D3 => "D3",
            SetupId::D4 => "D4",
            SetupId::D5 => "D5",
            SetupId::D6 => "D6",
            SetupId::D7 => "D7",
            SetupId::D8 => "D8",
        }
    }
}

impl fmt::Display for SetupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SetupId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SetupId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown setup {s:?}"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetupError {
    #[error("{id} needs {part}, which was not supplied")]
    MissingPart { id: SetupId, part: SetupPart },
    #[error("{part} has {got} rows, expected {expected}")]
    RowCountMismatch { part: SetupPart, expected: usize, got: usize },
    #[error("participant {participant}, window to hit {hit}: {source}")]
    Feature {
        participant: String,
        hit: usize,
        #[source]
        source: FeatureError,
    },
    #[error("inconsistent records: {0}")]
    Inconsistent(String),
}

/// Labels carried by every assembled row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLabel {
    pub participant_id: String,
    pub shape: TaskShape,
    pub direction: Direction,
    pub segment: SegmentLabel,
    /// Destination hit for window rows, the hit itself for D1 rows.
    pub hit: usize,
}

/// Unscaled building blocks for one shape, rows grouped by participant in
/// input order and ordered by hit within a participant.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeTables {
    pub shape: TaskShape,
    pub gaze_width: usize,
    /// `39·P × 11`
    pub features: Matrix,
    /// `39·P × G`, gaze at each window's destination hit.
    pub gaze: Matrix,
    /// `40·P × 1`
    pub raw: Matrix,
    pub window_labels: Vec<RowLabel>,
    pub hit_labels: Vec<RowLabel>,
}

impl ShapeTables {
    pub fn build(records: &[ParticipantRecord], opts: FeatureOptions) -> Result<Self, SetupError> {
        let first = records
            .first()
            .ok_or_else(|| SetupError::Inconsistent("no participant records".into()))?;
        let (shape, gaze_width) = (first.shape, first.gaze_width());
        let mut features = Vec::new();
        let mut gaze = Vec::new();
        let mut raw = Vec::new();
        let mut window_labels = Vec::new();
        let mut hit_labels = Vec::new();
        let label = |rec: &ParticipantRecord, hit: usize| RowLabel {
            participant_id: rec.participant_id.clone(),
            shape: rec.shape,
            direction: rec.direction,
            segment: assign_segment_label(hit).expect("hits are 1..=40"),
            hit,
        };
        for rec in records {
            if rec.shape != shape {
                return Err(SetupError::Inconsistent(format!(
                    "mixed shapes {shape} and {}",
                    rec.shape
                )));
            }
            if rec.gaze_width() != gaze_width {
                return Err(SetupError::Inconsistent(format!(
                    "gaze width {} for {}, expected {gaze_width}",
                    rec.gaze_width(),
                    rec.participant_id
                )));
            }
            for w in &rec.windows {
                let fv = extract_feature_vector_with(&w.values, opts).map_err(|source| {
                    SetupError::Feature {
                        participant: rec.participant_id.clone(),
                        hit: w.dest_hit,
                        source,
                    }
                })?;
                features.push(fv.0.to_vec());
                gaze.push(rec.gaze[w.dest_hit - 1].features.clone());
                window_labels.push(label(rec, w.dest_hit));
            }
            for (k, &r) in rec.hit_resistance.iter().enumerate() {
                raw.push(vec![r]);
                hit_labels.push(label(rec, k + 1));
            }
        }
        let m = |rows: &Vec<Vec<f64>>| Matrix::from_rows(rows).expect("rows are uniform");
        Ok(Self {
            shape,
            gaze_width,
            features: m(&features),
            gaze: m(&gaze),
            raw: m(&raw),
            window_labels,
            hit_labels,
        })
    }
}

/// Blocks available for assembly; any may be absent if no requested setup
/// needs it.
#[derive(Debug, Clone, Copy)]
pub struct SetupParts<'a> {
    pub features: Option<&'a Matrix>,
    pub gaze: Option<&'a Matrix>,
    pub probs: Option<&'a Matrix>,
    pub raw: Option<&'a Matrix>,
    pub window_labels: &'a [RowLabel],
    pub hit_labels: &'a [RowLabel],
}

/// An assembled setup: inputs plus per-row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub setup: SetupId,
    pub x: Matrix,
    pub labels: Vec<RowLabel>,
}

impl DataMatrix {
    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn cols(&self) -> usize {
        self.x.cols()
    }

    pub fn segment_classes(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.segment.index()).collect()
    }

    pub fn direction_classes(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.direction.class_index()).collect()
    }

    /// Contiguous row ranges belonging to one participant.
    pub fn sequences(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.labels.len() {
            if i == self.labels.len() || self.labels[i].participant_id != self.labels[start].participant_id {
                out.push(start..i);
                start = i;
            }
        }
        out
    }
}

pub fn assemble_setup(id: SetupId, parts: &SetupParts<'_>) -> Result<DataMatrix, SetupError> {
    let expected = if id.is_per_hit() {
        parts.hit_labels.len()
    } else {
        parts.window_labels.len()
    };
    let mut blocks = Vec::new();
    for &part in id.parts() {
        let block = match part {
            SetupPart::Raw => parts.raw,
            SetupPart::Features => parts.features,
            SetupPart::Gaze => parts.gaze,
            SetupPart::Probs => parts.probs,
        }
        .ok_or(SetupError::MissingPart { id, part })?;
        if block.rows() != expected {
            return Err(SetupError::RowCountMismatch {
                part,
                expected,
                got: block.rows(),
            });
        }
        blocks.push(block);
    }
    let x = Matrix::hstack(&blocks).expect("row counts checked");
    let labels = if id.is_per_hit() {
        parts.hit_labels.to_vec()
    } else {
        parts.window_labels.to_vec()
    };
    Ok(DataMatrix { setup: id, x, labels })
}

/// Writes a labelled feature table: `participant_id,shape,dest_hit,segment,
/// direction` followed by the canonical feature columns.
pub fn write_feature_csv(path: &Path, tables: &ShapeTables) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["participant_id", "shape", "dest_hit", "segment", "direction"];
    header.extend(FeatureKind::ALL.iter().map(|k| k.name()));
    w.write_record(&header)?;
    for (label, row) in tables.window_labels.iter().zip(tables.features.iter_rows()) {
        let mut rec = vec![
            label.participant_id.clone(),
            label.shape.to_string(),
            label.hit.to_string(),
            label.segment.index().to_string(),
            label.direction.to_string(),
        ];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()
}
