//! Seeded synthetic participants.
//!
//! Resistance follows one flexion/extension cycle over the traversal: a sine
//! for the circle, a triangle wave for the diamond's straight edges. A
//! counterclockwise participant visits the same profile in reverse
//! progress order. Because `profile(1 − p) = −profile(p)`, a short stretch of
//! raw signal looks the same for both directions half a cycle apart, so
//! direction is only recoverable once the arc (segment) is known.
//!
//! Gaze rows carry a noisy one-hot of the current segment in their first
//! four columns; the rest are participant-specific distractors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    assign_segment_label, DatasetError, Direction, GazeRow, HitEvent, ParticipantRecord,
    Recording, ResistanceTrace, Result, Sample, TaskShape, HITS_PER_TASK, NUM_SEGMENTS,
    WINDOWS_PER_TASK,
};
use crate::numcore::{derive_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub samples_per_window: usize,
    pub base_resistance: f64,
    pub flexion_amplitude: f64,
    /// Standard deviation of additive per-sample resistance noise (ohms).
    pub noise_std: f64,
    pub gaze_width: usize,
    pub gaze_noise_std: f64,
    /// Mean time between consecutive hits (ms).
    pub hit_interval_ms: f64,
    /// Relative between-participant spread of base resistance and amplitude.
    pub participant_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            samples_per_window: 20,
            base_resistance: 1000.0,
            flexion_amplitude: 150.0,
            noise_std: 4.0,
            gaze_width: 24,
            gaze_noise_std: 0.25,
            hit_interval_ms: 400.0,
            participant_jitter: 0.03,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(DatasetError::InvalidConfig(msg.to_string()));
        if self.samples_per_window < 2 {
            return bad("samples_per_window must be at least 2");
        }
        if !(self.base_resistance.is_finite() && self.base_resistance > 0.0) {
            return bad("base_resistance must be positive");
        }
        if !(self.flexion_amplitude.is_finite() && self.flexion_amplitude > 0.0) {
            return bad("flexion_amplitude must be positive");
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative");
        }
        if !(self.gaze_noise_std.is_finite() && self.gaze_noise_std >= 0.0) {
            return bad("gaze_noise_std must be non-negative");
        }
        if self.gaze_width < NUM_SEGMENTS {
            return bad("gaze_width must be at least 4");
        }
        if !(self.hit_interval_ms.is_finite() && self.hit_interval_ms > 0.0) {
            return bad("hit_interval_ms must be positive");
        }
        if !(0.0..0.5).contains(&self.participant_jitter) {
            return bad("participant_jitter must lie in [0, 0.5)");
        }
        Ok(())
    }
}

/// Normalised flexion profile over traversal progress `p ∈ [0, 1]`.
fn profile(shape: TaskShape, p: f64) -> f64 {
    match shape {
        TaskShape::Circle => (2.0 * PI * p).sin(),
        TaskShape::Diamond => {
            if p <= 0.25 {
                4.0 * p
            } else if p <= 0.75 {
                2.0 - 4.0 * p
            } else {
                4.0 * p - 4.0
            }
        }
    }
}

struct Traits {
    base: f64,
    amplitude: f64,
    pace: f64,
    gaze_offsets: Vec<f64>,
}

fn draw_traits(seed: u64, cfg: &SynthConfig) -> Traits {
    let mut rng = Rng::new(seed);
    let j = cfg.participant_jitter;
    let base = cfg.base_resistance * (1.0 + j * rng.uniform_in(-1.0, 1.0));
    let amplitude = cfg.flexion_amplitude * (1.0 + j * rng.uniform_in(-1.0, 1.0));
    let pace = 1.0 + 0.15 * rng.uniform_in(-1.0, 1.0);
    let gaze_offsets = (0..cfg.gaze_width).map(|_| rng.standard_normal()).collect();
    Traits {
        base,
        amplitude,
        pace,
        gaze_offsets,
    }
}

fn round_ms(t: f64) -> f64 {
    (t * 100.0).round() / 100.0
}

fn generate(
    participant_id: String,
    traits_seed: u64,
    task_seed: u64,
    shape: TaskShape,
    direction: Direction,
    cfg: &SynthConfig,
) -> Result<Recording> {
    cfg.validate()?;
    let traits = draw_traits(traits_seed, cfg);
    let mut rng = Rng::new(task_seed);
    let s = cfg.samples_per_window;

    let mut t = round_ms(500.0 + 200.0 * rng.uniform());
    let mut hits = Vec::with_capacity(HITS_PER_TASK);
    for k in 1..=HITS_PER_TASK {
        hits.push(HitEvent {
            hit_index: k,
            timestamp_ms: t,
        });
        let interval = cfg.hit_interval_ms * traits.pace * rng.uniform_in(0.85, 1.15);
        t = round_ms(t + interval.max(s as f64));
    }

    let level = |p: f64| {
        let progress = match direction {
            Direction::Clockwise => p,
            Direction::Counterclockwise => 1.0 - p,
        };
        traits.base + traits.amplitude * profile(shape, progress)
    };

    let mut samples = Vec::with_capacity(WINDOWS_PER_TASK * s + 1);
    for k in 0..WINDOWS_PER_TASK {
        let (t0, t1) = (hits[k].timestamp_ms, hits[k + 1].timestamp_ms);
        let step = (t1 - t0) / s as f64;
        for j in 0..s {
            // sample values sit at cell midpoints so the profile is exactly
            // mirrored between directions
            let p = (k as f64 + (j as f64 + 0.5) / s as f64) / WINDOWS_PER_TASK as f64;
            let noise = cfg.noise_std * rng.standard_normal();
            samples.push(Sample {
                timestamp_ms: round_ms(t0 + j as f64 * step),
                resistance_ohm: level(p) + noise,
            });
        }
    }
    let noise = cfg.noise_std * rng.standard_normal();
    samples.push(Sample {
        timestamp_ms: hits[WINDOWS_PER_TASK].timestamp_ms,
        resistance_ohm: level(1.0) + noise,
    });

    let mut gaze = Vec::with_capacity(HITS_PER_TASK);
    for k in 1..=HITS_PER_TASK {
        let seg = assign_segment_label(k)?.index();
        let features = (0..cfg.gaze_width)
            .map(|d| {
                let z = rng.standard_normal();
                if d < NUM_SEGMENTS {
                    f64::from(u8::from(d == seg)) + cfg.gaze_noise_std * z
                } else {
                    traits.gaze_offsets[d] + 0.5 * z
                }
            })
            .collect();
        gaze.push(GazeRow {
            hit_index: k,
            features,
        });
    }

    Ok(Recording {
        trace: ResistanceTrace {
            participant_id: participant_id.clone(),
            shape,
            samples,
        },
        participant_id,
        shape,
        direction,
        hits,
        gaze,
    })
}

/// One unsegmented recording for a named participant.
pub fn synth_recording(
    seed: u64,
    participant_id: &str,
    shape: TaskShape,
    direction: Direction,
    cfg: &SynthConfig,
) -> Result<Recording> {
    generate(
        participant_id.to_string(),
        derive_seed(seed, "traits"),
        derive_seed(seed, shape.as_str()),
        shape,
        direction,
        cfg,
    )
}

/// A segmented synthetic participant-task.
pub fn synth_participant(
    seed: u64,
    shape: TaskShape,
    direction: Direction,
    cfg: &SynthConfig,
) -> Result<ParticipantRecord> {
    let rec = synth_recording(seed, &format!("S{seed}"), shape, direction, cfg)?;
    ParticipantRecord::from_recording(&rec)
}

/// `participants` participants (first half clockwise, second half
/// counterclockwise), each performing every shape in `shapes`.
///
/// Participant traits are shared across a participant's tasks; per-task
/// noise and timing come from a seed derived from participant and shape.
pub fn synth_cohort(
    seed: u64,
    participants: usize,
    shapes: &[TaskShape],
    cfg: &SynthConfig,
) -> Result<Vec<Recording>> {
    cfg.validate()?;
    if participants == 0 {
        return Err(DatasetError::InvalidConfig("participants must be positive".into()));
    }
    let cw = participants.div_ceil(2);
    let mut out = Vec::with_capacity(participants * shapes.len());
    for &shape in shapes {
        for i in 0..participants {
            let id = format!("P{:02}", i + 1);
            let direction = if i < cw {
                Direction::Clockwise
            } else {
                Direction::Counterclockwise
            };
            out.push(generate(
                id.clone(),
                derive_seed(seed, &format!("{id}/traits")),
                derive_seed(seed, &format!("{id}/{shape}")),
                shape,
                direction,
                cfg,
            )?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window_means(rec: &ParticipantRecord) -> Vec<f64> {
        rec.windows
            .iter()
            .map(|w| w.values.iter().sum::<f64>() / w.len() as f64)
            .collect()
    }

    #[test]
    fn same_seed_same_record() {
        let cfg = SynthConfig::default();
        let a = synth_participant(7, TaskShape::Circle, Direction::Clockwise, &cfg).unwrap();
        let b = synth_participant(7, TaskShape::Circle, Direction::Clockwise, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_shape_contract() {
        let rec =
            synth_participant(1, TaskShape::Diamond, Direction::Counterclockwise, &SynthConfig::default())
                .unwrap();
        assert_eq!(rec.windows.len(), 39);
        assert_eq!(rec.gaze.len(), 40);
        assert!(rec.gaze.iter().all(|g| g.features.len() == 24));
        assert!(rec.windows.iter().all(|w| w.len() == 20));
    }

    #[test]
    fn noiseless_directions_mirror_each_other() {
        let cfg = SynthConfig {
            noise_std: 0.0,
            ..SynthConfig::default()
        };
        for shape in TaskShape::ALL {
            let cw = synth_participant(3, shape, Direction::Clockwise, &cfg).unwrap();
            let ccw = synth_participant(3, shape, Direction::Counterclockwise, &cfg).unwrap();
            let (a, mut b) = (window_means(&cw), window_means(&ccw));
            b.reverse();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-9 * x.abs(), "{shape}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn noiseless_signal_is_periodic_in_progress() {
        let cfg = SynthConfig {
            noise_std: 0.0,
            ..SynthConfig::default()
        };
        let rec = synth_participant(5, TaskShape::Circle, Direction::Clockwise, &cfg).unwrap();
        let first = rec.hit_resistance[0];
        let last = rec.hit_resistance[39];
        // one full cycle: start and end both sit at the base level
        assert!((first - last).abs() < 0.02 * cfg.flexion_amplitude);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = SynthConfig::default();
        for cfg in [
            SynthConfig { flexion_amplitude: 0.0, ..base.clone() },
            SynthConfig { noise_std: -1.0, ..base.clone() },
            SynthConfig { samples_per_window: 1, ..base.clone() },
            SynthConfig { gaze_width: 3, ..base.clone() },
        ] {
            assert!(matches!(
                synth_participant(1, TaskShape::Circle, Direction::Clockwise, &cfg),
                Err(DatasetError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn cohort_is_balanced() {
        let recs = synth_cohort(42, 16, &TaskShape::ALL, &SynthConfig::default()).unwrap();
        assert_eq!(recs.len(), 32);
        let ccw = recs
            .iter()
            .filter(|r| r.shape == TaskShape::Circle && r.direction == Direction::Counterclockwise)
            .count();
        assert_eq!(ccw, 8);
        let windows: usize = recs
            .iter()
            .filter(|r| r.shape == TaskShape::Circle)
            .map(|r| ParticipantRecord::from_recording(r).unwrap().windows.len())
            .sum();
        assert_eq!(windows, 624);
    }

    #[test]
    fn profiles_are_odd_about_the_midpoint() {
        for shape in TaskShape::ALL {
            for i in 0..=20 {
                let p = i as f64 / 20.0;
                assert!((profile(shape, 1.0 - p) + profile(shape, p)).abs() < 1e-12);
            }
        }
    }
}
