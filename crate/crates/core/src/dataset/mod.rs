//! Recordings, inter-hit segmentation and labels.
//!
//! A participant traces a shape through 40 hit points. The resistance trace
//! between two consecutive hits forms one [`SegmentWindow`], so a task yields
//! 39 windows. Gaze is captured at every hit (40 rows). Windows are labelled
//! by their destination hit, and the 40 hits fall into four arcs of ten.

mod io;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{
    load_dataset, load_gaze_csv, load_hits_csv, load_participants_csv, load_resistance_csv,
    write_dataset, GAZE_FILE, HITS_FILE, PARTICIPANTS_FILE, RESISTANCE_FILE,
};
pub use synth::{synth_cohort, synth_participant, synth_recording, SynthConfig};

pub const HITS_PER_TASK: usize = 40;
pub const WINDOWS_PER_TASK: usize = HITS_PER_TASK - 1;
pub const NUM_SEGMENTS: usize = 4;
pub const HITS_PER_SEGMENT: usize = HITS_PER_TASK / NUM_SEGMENTS;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("timestamp decreases at row {row}")]
    NonMonotonicTimestamp { row: usize },
    #[error("non-numeric or non-finite value in column `{column}` at row {row}")]
    NonNumericValue { row: usize, column: String },
    #[error("unrecognised value {value:?} in column `{column}` at row {row}")]
    UnknownValue { row: usize, column: String, value: String },
    #[error("span between hits {0} and {next} holds fewer than 2 samples", next = .0 + 1)]
    EmptyWindow(usize),
    #[error("hit index {0} outside 1..=40")]
    OutOfRange(usize),
    #[error("invalid hit events: {0}")]
    InvalidHitEvents(String),
    #[error("gaze row {row} has width {found}, expected {expected}")]
    GazeWidthMismatch { row: usize, expected: usize, found: usize },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskShape {
    Diamond,
    Circle,
}

impl TaskShape {
    pub const ALL: [TaskShape; 2] = [TaskShape::Diamond, TaskShape::Circle];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskShape::Diamond => "diamond",
            TaskShape::Circle => "circle",
        }
    }
}

impl fmt::Display for TaskShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskShape {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "diamond" => Ok(TaskShape::Diamond),
            "circle" => Ok(TaskShape::Circle),
            other => Err(format!("unknown shape {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "cw")]
    Clockwise,
    #[serde(rename = "ccw")]
    Counterclockwise,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Clockwise, Direction::Counterclockwise];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Clockwise => "cw",
            Direction::Counterclockwise => "ccw",
        }
    }

    /// Class index used by the direction classifiers.
    pub fn class_index(self) -> usize {
        match self {
            Direction::Clockwise => 0,
            Direction::Counterclockwise => 1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cw" | "clockwise" => Ok(Direction::Clockwise),
            "ccw" | "counterclockwise" => Ok(Direction::Counterclockwise),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitEvent {
    /// 1-based position along the shape outline.
    pub hit_index: usize,
    pub timestamp_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub timestamp_ms: f64,
    pub resistance_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistanceTrace {
    pub participant_id: String,
    pub shape: TaskShape,
    /// Ordered by non-decreasing timestamp.
    pub samples: Vec<Sample>,
}

/// Resistance samples recorded between two consecutive hit points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentWindow {
    pub values: Vec<f64>,
    pub source_hit: usize,
    pub dest_hit: usize,
}

impl SegmentWindow {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeRow {
    pub hit_index: usize,
    pub features: Vec<f64>,
}

/// One of the four arcs of a shape, `0..=3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentLabel(u8);

impl SegmentLabel {
    pub fn new(value: usize) -> Option<Self> {
        (value < NUM_SEGMENTS).then_some(Self(value as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Segment of a hit point: contiguous arcs of ten, `floor((hit − 1) / 10)`.
pub fn assign_segment_label(hit_index: usize) -> Result<SegmentLabel> {
    if !(1..=HITS_PER_TASK).contains(&hit_index) {
        return Err(DatasetError::OutOfRange(hit_index));
    }
    Ok(SegmentLabel(((hit_index - 1) / HITS_PER_SEGMENT) as u8))
}

/// Everything captured for one participant performing one task, before
/// segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub participant_id: String,
    pub shape: TaskShape,
    pub direction: Direction,
    pub trace: ResistanceTrace,
    pub hits: Vec<HitEvent>,
    pub gaze: Vec<GazeRow>,
}

/// A segmented participant-task: 39 windows, 40 gaze rows and the raw
/// resistance reading at each of the 40 hits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: String,
    pub shape: TaskShape,
    pub direction: Direction,
    pub windows: Vec<SegmentWindow>,
    pub gaze: Vec<GazeRow>,
    pub hit_resistance: Vec<f64>,
}

impl ParticipantRecord {
    pub fn from_recording(rec: &Recording) -> Result<Self> {
        let windows = segment_trace(&rec.trace, &rec.hits)?;
        let hit_resistance = hit_resistance(&rec.trace, &rec.hits)?;
        if rec.gaze.len() != HITS_PER_TASK {
            return Err(DatasetError::Inconsistent(format!(
                "{}/{}: {} gaze rows, expected {HITS_PER_TASK}",
                rec.participant_id,
                rec.shape,
                rec.gaze.len()
            )));
        }
        let width = rec.gaze[0].features.len();
        for (k, row) in rec.gaze.iter().enumerate() {
            if row.hit_index != k + 1 {
                return Err(DatasetError::Inconsistent(format!(
                    "{}/{}: gaze row {} carries hit index {}",
                    rec.participant_id,
                    rec.shape,
                    k + 1,
                    row.hit_index
                )));
            }
            if row.features.len() != width {
                return Err(DatasetError::GazeWidthMismatch {
                    row: k + 1,
                    expected: width,
                    found: row.features.len(),
                });
            }
        }
        Ok(Self {
            participant_id: rec.participant_id.clone(),
            shape: rec.shape,
            direction: rec.direction,
            windows,
            gaze: rec.gaze.clone(),
            hit_resistance,
        })
    }

    pub fn gaze_width(&self) -> usize {
        self.gaze.first().map_or(0, |g| g.features.len())
    }
}

fn validate_hits(events: &[HitEvent]) -> Result<()> {
    if events.len() != HITS_PER_TASK {
        return Err(DatasetError::InvalidHitEvents(format!(
            "{} events, expected {HITS_PER_TASK}",
            events.len()
        )));
    }
    for (k, e) in events.iter().enumerate() {
        if e.hit_index != k + 1 {
            return Err(DatasetError::InvalidHitEvents(format!(
                "event {} carries hit index {}",
                k + 1,
                e.hit_index
            )));
        }
        if !e.timestamp_ms.is_finite() || e.timestamp_ms < 0.0 {
            return Err(DatasetError::InvalidHitEvents(format!(
                "hit {} has timestamp {}",
                e.hit_index, e.timestamp_ms
            )));
        }
    }
    if let Some(w) = events.windows(2).find(|w| w[1].timestamp_ms <= w[0].timestamp_ms) {
        return Err(DatasetError::InvalidHitEvents(format!(
            "timestamps not strictly increasing at hit {}",
            w[1].hit_index
        )));
    }
    Ok(())
}

/// Cuts a trace into the 39 half-open spans `[t_k, t_{k+1})`.
pub fn segment_trace(trace: &ResistanceTrace, events: &[HitEvent]) -> Result<Vec<SegmentWindow>> {
    validate_hits(events)?;
    let samples = &trace.samples;
    // first sample index with timestamp >= t
    let lower = |t: f64| samples.partition_point(|s| s.timestamp_ms < t);
    let mut windows = Vec::with_capacity(WINDOWS_PER_TASK);
    for pair in events.windows(2) {
        let (start, end) = (lower(pair[0].timestamp_ms), lower(pair[1].timestamp_ms));
        if end < start + 2 {
            return Err(DatasetError::EmptyWindow(pair[0].hit_index));
        }
        windows.push(SegmentWindow {
            values: samples[start..end].iter().map(|s| s.resistance_ohm).collect(),
            source_hit: pair[0].hit_index,
            dest_hit: pair[1].hit_index,
        });
    }
    Ok(windows)
}

/// Raw resistance at each hit: the latest sample at or before the hit
/// timestamp, or the first sample when the trace starts after the hit.
pub fn hit_resistance(trace: &ResistanceTrace, events: &[HitEvent]) -> Result<Vec<f64>> {
    let samples = &trace.samples;
    if samples.is_empty() {
        return Err(DatasetError::Inconsistent(format!(
            "{}/{}: empty resistance trace",
            trace.participant_id, trace.shape
        )));
    }
    Ok(events
        .iter()
        .map(|e| {
            let after = samples.partition_point(|s| s.timestamp_ms <= e.timestamp_ms);
            samples[after.saturating_sub(1)].resistance_ohm
        })
        .collect())
}
