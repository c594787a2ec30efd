use serde::{Deserialize, Serialize};

use super::{Matrix, NumError, Parameters, Result, Rng};

/// Affine layer `y = W x + b` with `W` stored out×in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Glorot/Xavier uniform bound `√(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: Matrix::zeros(output, input),
            bias: vec![0.0; output],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(input: usize, output: usize, rng: &mut Rng) -> Self {
        let bound = glorot_bound(input, output);
        let mut layer = Self::zeros(input, output);
        for w in layer.weights.as_mut_slice() {
            *w = rng.uniform_in(-bound, bound);
        }
        layer
    }

    pub fn input_width(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_width(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_width() {
            return Err(NumError::ShapeMismatch(format!(
                "dense layer expects width {}, got {}",
                self.input_width(),
                x.len()
            )));
        }
        let mut y = vec![0.0; self.output_width()];
        self.forward_into(x, &mut y);
        Ok(y)
    }

    #[inline]
    pub(crate) fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        self.weights.matvec_into(x, y);
        for (v, b) in y.iter_mut().zip(&self.bias) {
            *v += b;
        }
    }

    /// Accumulates `∂L/∂W`, `∂L/∂b` into `grad` and returns `∂L/∂x`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut DenseLayer) -> Vec<f64> {
        grad.weights.outer_acc(dy, x);
        for (gb, d) in grad.bias.iter_mut().zip(dy) {
            *gb += d;
        }
        let mut dx = vec![0.0; self.input_width()];
        self.weights.tmatvec_acc(dy, &mut dx);
        dx
    }

    /// Gradient accumulation without computing `∂L/∂x` (first layer).
    pub(crate) fn backward_params_only(&self, x: &[f64], dy: &[f64], grad: &mut DenseLayer) {
        grad.weights.outer_acc(dy, x);
        for (gb, d) in grad.bias.iter_mut().zip(dy) {
            *gb += d;
        }
    }
}

impl Parameters for DenseLayer {
    fn visit(&self, f: &mut dyn FnMut(&[f64], bool)) {
        f(self.weights.as_slice(), true);
        f(&self.bias, false);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64], bool)) {
        f(self.weights.as_mut_slice(), true);
        f(&mut self.bias, false);
    }
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Routes `dy` through ReLU given the pre-activation input.
pub fn relu_backward(pre: &[f64], dy: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(dy)
        .map(|(&p, &d)| if p > 0.0 { d } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut layer = DenseLayer::zeros(3, 3);
        for i in 0..3 {
            layer.weights.set(i, i, 1.0);
        }
        assert_eq!(layer.forward(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn affine_arithmetic() {
        let layer = DenseLayer {
            weights: Matrix::from_rows(&[[1.0, 2.0]]).unwrap(),
            bias: vec![3.0],
        };
        assert_eq!(layer.forward(&[1.0, 1.0]).unwrap(), vec![6.0]);
    }

    #[test]
    fn wrong_width_is_shape_mismatch() {
        let layer = DenseLayer::zeros(2, 1);
        assert!(matches!(layer.forward(&[1.0]), Err(NumError::ShapeMismatch(_))));
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(relu(&[-3.0, -0.5]), vec![0.0, 0.0]);
        assert_eq!(relu(&[0.5, 4.0]), vec![0.5, 4.0]);
    }

    #[test]
    fn glorot_init_respects_bound() {
        let mut rng = Rng::new(1);
        let layer = DenseLayer::init(24, 64, &mut rng);
        let b = glorot_bound(24, 64);
        assert!(layer.weights.as_slice().iter().all(|w| w.abs() <= b));
        assert!(layer.bias.iter().all(|&v| v == 0.0));
    }
}
