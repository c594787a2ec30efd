use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("cannot fit a scaler on an empty matrix")]
    EmptyMatrix,
    #[error("scaler was fit on {fitted} columns, got {got}")]
    ColumnMismatch { fitted: usize, got: usize },
}

/// Per-column min-max scaler. Constant columns map to 0; values outside the
/// fitted range are not clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl Scaler {
    pub fn fit(matrix: &Matrix) -> Result<Self, ScaleError> {
        if matrix.rows() == 0 || matrix.cols() == 0 {
            return Err(ScaleError::EmptyMatrix);
        }
        let mut mins = matrix.row(0).to_vec();
        let mut maxs = mins.clone();
        for row in matrix.iter_rows().skip(1) {
            for (c, &v) in row.iter().enumerate() {
                mins[c] = mins[c].min(v);
                maxs[c] = maxs[c].max(v);
            }
        }
        Ok(Self { mins, maxs })
    }

    /// Fits on the listed rows only.
    pub fn fit_rows(matrix: &Matrix, rows: &[usize]) -> Result<Self, ScaleError> {
        Self::fit(&matrix.select_rows(rows))
    }

    pub fn ranges(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.mins.iter().copied().zip(self.maxs.iter().copied())
    }

    pub fn width(&self) -> usize {
        self.mins.len()
    }

    fn check(&self, m: &Matrix) -> Result<(), ScaleError> {
        if m.cols() != self.width() {
            return Err(ScaleError::ColumnMismatch {
                fitted: self.width(),
                got: m.cols(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, matrix: &Matrix) -> Result<Matrix, ScaleError> {
        self.check(matrix)?;
        let mut out = matrix.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let span = self.maxs[c] - self.mins[c];
                *v = if span > 0.0 { (*v - self.mins[c]) / span } else { 0.0 };
            }
        }
        Ok(out)
    }

    /// `x = y·(max − min) + min`; constant columns come back as their value.
    pub fn invert(&self, matrix: &Matrix) -> Result<Matrix, ScaleError> {
        self.check(matrix)?;
        let mut out = matrix.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = *v * (self.maxs[c] - self.mins[c]) + self.mins[c];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn fit_stores_ranges() {
        let s = Scaler::fit(&col(&[2.0, 4.0, 6.0])).unwrap();
        assert_eq!(s.ranges().collect::<Vec<_>>(), vec![(2.0, 6.0)]);
        let s = Scaler::fit(&col(&[5.0, 5.0])).unwrap();
        assert_eq!(s.ranges().collect::<Vec<_>>(), vec![(5.0, 5.0)]);
        let two = Matrix::from_rows(&[[1.0, -3.0], [0.0, 9.0]]).unwrap();
        let s = Scaler::fit(&two).unwrap();
        assert_eq!(s.ranges().collect::<Vec<_>>(), vec![(0.0, 1.0), (-3.0, 9.0)]);
    }

    #[test]
    fn apply_cases() {
        let s = Scaler::fit(&col(&[2.0, 4.0, 6.0])).unwrap();
        assert_eq!(s.apply(&col(&[2.0, 4.0, 6.0])).unwrap().into_vec(), vec![0.0, 0.5, 1.0]);
        let s = Scaler::fit(&col(&[2.0, 6.0])).unwrap();
        assert_eq!(s.apply(&col(&[8.0])).unwrap().into_vec(), vec![1.5]);
        let s = Scaler::fit(&col(&[5.0, 5.0])).unwrap();
        assert_eq!(s.apply(&col(&[-40.0, 5.0, 1e9])).unwrap().into_vec(), vec![0.0; 3]);
    }

    #[test]
    fn errors() {
        assert_eq!(Scaler::fit(&Matrix::zeros(0, 3)), Err(ScaleError::EmptyMatrix));
        let s = Scaler::fit(&col(&[1.0, 2.0])).unwrap();
        assert_eq!(
            s.apply(&Matrix::zeros(1, 2)),
            Err(ScaleError::ColumnMismatch { fitted: 1, got: 2 })
        );
    }

    proptest! {
        #[test]
        fn apply_then_invert_recovers_input(
            rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 2..30)
        ) {
            let m = Matrix::from_rows(&rows).unwrap();
            let s = Scaler::fit(&m).unwrap();
            let back = s.invert(&s.apply(&m).unwrap()).unwrap();
            for c in 0..3 {
                let (lo, hi) = s.ranges().nth(c).unwrap();
                if hi > lo {
                    for r in 0..m.rows() {
                        prop_assert!((back.get(r, c) - m.get(r, c)).abs() <= 1e-12 * (1.0 + m.get(r, c).abs()));
                    }
                }
            }
        }
    }
}
