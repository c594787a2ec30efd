use serde::{Deserialize, Serialize};

use super::{glorot_bound, Matrix, NumError, Parameters, Result, Rng};

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One LSTM cell. Gate pre-activations are `W [x; h] + b`, with the four
/// gates stacked row-wise in the order input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub input: usize,
    pub hidden: usize,
    /// `4H × (I + H)`
    pub weights: Matrix,
    /// `4H`
    pub bias: Vec<f64>,
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    xh: Vec<f64>,
    /// Post-activation gates `[i; f; o; g]`.
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            weights: Matrix::zeros(4 * hidden, input + hidden),
            bias: vec![0.0; 4 * hidden],
        }
    }

    /// Glorot-uniform gate matrices, zero biases except the forget gate at 1.
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut cell = Self::zeros(input, hidden);
        let bound = glorot_bound(input + hidden, hidden);
        for w in cell.weights.as_mut_slice() {
            *w = rng.uniform_in(-bound, bound);
        }
        for b in &mut cell.bias[hidden..2 * hidden] {
            *b = 1.0;
        }
        cell
    }

    fn check(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<()> {
        if x.len() != self.input || h.len() != self.hidden || c.len() != self.hidden {
            return Err(NumError::ShapeMismatch(format!(
                "lstm cell expects x={}, h={}, c={}; got x={}, h={}, c={}",
                self.input,
                self.hidden,
                self.hidden,
                x.len(),
                h.len(),
                c.len()
            )));
        }
        Ok(())
    }

    /// Plain forward step returning `(h', c')`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(x, h, c)?;
        let cache = self.step_unchecked(x, h, c);
        Ok((cache.h, cache.c))
    }

    pub fn step_cached(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<LstmStepCache> {
        self.check(x, h, c)?;
        Ok(self.step_unchecked(x, h, c))
    }

    pub(crate) fn step_unchecked(&self, x: &[f64], h: &[f64], c: &[f64]) -> LstmStepCache {
        let hs = self.hidden;
        let mut xh = Vec::with_capacity(self.input + hs);
        xh.extend_from_slice(x);
        xh.extend_from_slice(h);

        let mut gates = vec![0.0; 4 * hs];
        self.weights.matvec_into(&xh, &mut gates);
        for (z, b) in gates.iter_mut().zip(&self.bias) {
            *z += b;
        }
        for z in &mut gates[..3 * hs] {
            *z = sigmoid(*z);
        }
        for z in &mut gates[3 * hs..] {
            *z = z.tanh();
        }

        let mut c_new = vec![0.0; hs];
        let mut tanh_c = vec![0.0; hs];
        let mut h_new = vec![0.0; hs];
        for j in 0..hs {
            let (i, f, o, g) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
            c_new[j] = f * c[j] + i * g;
            tanh_c[j] = c_new[j].tanh();
            h_new[j] = o * tanh_c[j];
        }
        LstmStepCache {
            xh,
            gates,
            c_prev: c.to_vec(),
            tanh_c,
            h: h_new,
            c: c_new,
        }
    }

    /// Backward through one step.
    ///
    /// `dh` and `dc` are the gradients flowing into `h'` and `c'`. Parameter
    /// gradients are accumulated into `grad`; returns `(dx, dh_prev, dc_prev)`.
    pub fn backward_step(
        &self,
        cache: &LstmStepCache,
        dh: &[f64],
        dc: &[f64],
        grad: &mut LstmCell,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hs = self.hidden;
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * hs];
        let mut dc_prev = vec![0.0; hs];
        for j in 0..hs {
            let (i, f, o, cand) = (g[j], g[hs + j], g[2 * hs + j], g[3 * hs + j]);
            let tc = cache.tanh_c[j];
            let d_o = dh[j] * tc;
            let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
            let d_i = dct * cand;
            let d_g = dct * i;
            let d_f = dct * cache.c_prev[j];
            dc_prev[j] = dct * f;
            dz[j] = d_i * i * (1.0 - i);
            dz[hs + j] = d_f * f * (1.0 - f);
            dz[2 * hs + j] = d_o * o * (1.0 - o);
            dz[3 * hs + j] = d_g * (1.0 - cand * cand);
        }
        grad.weights.outer_acc(&dz, &cache.xh);
        for (gb, d) in grad.bias.iter_mut().zip(&dz) {
            *gb += d;
        }
        let mut dxh = vec![0.0; self.input + hs];
        self.weights.tmatvec_acc(&dz, &mut dxh);
        let dh_prev = dxh.split_off(self.input);
        (dxh, dh_prev, dc_prev)
    }
}

impl Parameters for LstmCell {
    fn visit(&self, f: &mut dyn FnMut(&[f64], bool)) {
        f(self.weights.as_slice(), true);
        f(&self.bias, false);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64], bool)) {
        f(self.weights.as_mut_slice(), true);
        f(&mut self.bias, false);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_cell_from_zero_state_stays_zero() {
        let cell = LstmCell::zeros(3, 4);
        let (h, c) = cell.step(&[0.7, -1.0, 2.0], &[0.0; 4], &[0.0; 4]).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_carries_memory() {
        let mut cell = LstmCell::zeros(2, 3);
        for b in &mut cell.bias[3..6] {
            *b = 30.0;
        }
        let c0 = [0.5, -0.25, 0.9];
        let (_, c) = cell.step(&[1.0, -1.0], &[0.1, 0.2, 0.3], &c0).unwrap();
        for (a, b) in c.iter().zip(&c0) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn hidden_state_is_bounded() {
        let mut rng = Rng::new(9);
        let mut cell = LstmCell::init(5, 6, &mut rng);
        for w in cell.weights.as_mut_slice() {
            *w *= 20.0;
        }
        let (mut h, mut c) = (vec![0.0; 6], vec![0.0; 6]);
        for t in 0..20 {
            let x: Vec<f64> = (0..5).map(|k| ((t * 5 + k) as f64).sin() * 50.0).collect();
            (h, c) = cell.step(&x, &h, &c).unwrap();
            assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn forget_bias_initialised_to_one() {
        let cell = LstmCell::init(4, 5, &mut Rng::new(0));
        assert!(cell.bias[5..10].iter().all(|&b| b == 1.0));
        assert!(cell.bias[..5].iter().all(|&b| b == 0.0));
        assert!(cell.bias[10..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn width_mismatch() {
        let cell = LstmCell::zeros(2, 2);
        assert!(cell.step(&[1.0], &[0.0; 2], &[0.0; 2]).is_err());
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
