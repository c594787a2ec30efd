//! Two-step motion-intention prediction.
//!
//! Step one classifies which of four arcs of a traced shape a participant is
//! on, from gaze captured at each hit point. Step two classifies the
//! traversal direction (clockwise or counterclockwise) from time-domain
//! features of a wearable resistance sensor, optionally fused with the step
//! one probabilities.
//!
//! * [`dataset`]: recordings, segmentation into inter-hit windows, CSV I/O
//!   and a seeded synthetic cohort generator.
//! * [`features`]: the eleven time-domain features, min-max scaling and the
//!   D1–D8 data setups.
//! * [`numcore`]: dense/LSTM layers with manual backprop, Adam, gradient
//!   checking.
//! * [`models`]: the segment MLP, the direction LSTM and the KNN / linear SVM
//!   / logistic regression / random-guess baselines.
//! * [`pipeline`]: splitting, metrics, the two-step run, the experiment grid
//!   and report rendering.

pub mod dataset;
pub mod features;
pub mod models;
pub mod numcore;
pub mod pipeline;
