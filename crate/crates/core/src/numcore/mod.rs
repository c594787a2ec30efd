//! Minimal deterministic numerical kernel.
//!
//! Dense and LSTM layers with hand-written backward passes, a numerically
//! stable softmax cross-entropy, Adam with decoupled-from-bias L2, a central
//! difference gradient checker and a seeded portable RNG. Everything is
//! `f64` and every reduction runs in ascending index order so that two runs
//! with the same seed produce bit-identical parameter trajectories.

mod adam;
mod container;
mod dense;
mod gradcheck;
mod loss;
mod lstm;
mod matrix;
mod rng;

pub use adam::{AdamConfig, AdamState};
pub use container::{ModelContainer, TensorRecord, CONTAINER_MAGIC, CONTAINER_VERSION};
pub use dense::{glorot_bound, relu, relu_backward, DenseLayer};
pub use gradcheck::{grad_check, DENOM_FLOOR};
pub use loss::{softmax, softmax_cross_entropy};
pub use lstm::{sigmoid, LstmCell, LstmStepCache};
pub use matrix::Matrix;
pub use rng::{derive_seed, stable_hash_hex, Rng};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("target class {target} out of range for {width} logits")]
    BadTarget { target: usize, width: usize },
    #[error("malformed model container: {0}")]
    BadContainer(String),
}

pub type Result<T> = std::result::Result<T, NumError>;

/// A bag of trainable tensors visited in a fixed order.
///
/// The `bool` passed to the visitor marks tensors subject to L2 weight decay
/// (weight matrices); biases are visited with `false`.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&[f64], bool));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64], bool));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |t, _| n += t.len());
        n
    }

    /// All parameters concatenated in visiting order.
    fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |t, _| out.extend_from_slice(t));
        out
    }

    fn decay_mask(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |t, decay| out.extend(std::iter::repeat_n(decay, t.len())));
        out
    }

    /// Overwrites every parameter from a flat vector in visiting order.
    fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(NumError::ShapeMismatch(format!(
                "flat vector has {} values, parameters hold {}",
                values.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        self.visit_mut(&mut |t, _| {
            t.copy_from_slice(&values[offset..offset + t.len()]);
            offset += t.len();
        });
        Ok(())
    }

    fn fill_zero(&mut self) {
        self.visit_mut(&mut |t, _| t.iter_mut().for_each(|v| *v = 0.0));
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |t, _| ok &= t.iter().all(|v| v.is_finite()));
        ok
    }
}

impl Parameters for Vec<f64> {
    fn visit(&self, f: &mut dyn FnMut(&[f64], bool)) {
        f(self, true)
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64], bool)) {
        f(self, true)
    }
}

impl<P: Parameters> Parameters for [P] {
    fn visit(&self, f: &mut dyn FnMut(&[f64], bool)) {
        for p in self {
            p.visit(f);
        }
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64], bool)) {
        for p in self {
            p.visit_mut(f);
        }
    }
}
