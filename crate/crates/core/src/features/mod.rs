//! Time-domain features of a resistance window, min-max scaling and the
//! D1–D8 data setups.
//!
//! With `x_1..x_N` the window samples (1-based) and `μ` their mean:
//!
//! | kind  | value                                                   |
//! |-------|---------------------------------------------------------|
//! | IAV   | `Σ |x_n|`                                               |
//! | MAV   | `IAV / N`                                               |
//! | MMAV1 | `(1/N) Σ w_n |x_n|`, `w_n = 1` on `[0.25N, 0.75N]`, else `0.5` |
//! | MMAV2 | `(1/N) Σ w_n |x_n|`, `w_n = 1` on `[0.25N, 0.75N]`, `4n/N` below, `4(n−N)/N` above |
//! | SSI   | `Σ x_n²`                                                |
//! | VAR   | `Σ (x_n − μ)² / (N − 1)`                                |
//! | RMS   | `√(SSI / N)`                                            |
//! | WL    | `Σ_{n<N} |x_{n+1} − x_n|`                               |
//! | LOG   | `(1/N) Σ log10(max(|x_n|, 1e-12))`                      |
//! | SKEW  | `m3 / m2^{3/2}` with `m_k = (1/N) Σ (x_n − μ)^k`        |
//! | KURT  | `m4 / s2²` with `s2 = Σ (x_n − μ)² / (N − 1)`           |
//!
//! The MMAV2 upper-tail weight is negative as written; set
//! [`FeatureOptions::mmav2_positive_tail`] for `4(N−n)/N` instead.

mod scaler;
mod setup;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SegmentWindow;

pub use scaler::{ScaleError, Scaler};
pub use setup::{
    assemble_setup, write_feature_csv, DataMatrix, RowLabel, SetupError, SetupId, SetupPart,
    SetupParts, ShapeTables,
};

/// Clamp applied to `|x_n|` before taking `log10`.
pub const LOG_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Iav,
    Mav,
    Mmav1,
    Mmav2,
    Ssi,
    Var,
    Rms,
    Wl,
    Log,
    Skew,
    Kurt,
}

impl FeatureKind {
    /// Canonical column order.
    pub const ALL: [FeatureKind; 11] = [
        FeatureKind::Iav,
        FeatureKind::Mav,
        FeatureKind::Mmav1,
        FeatureKind::Mmav2,
        FeatureKind::Ssi,
        FeatureKind::Var,
        FeatureKind::Rms,
        FeatureKind::Wl,
        FeatureKind::Log,
        FeatureKind::Skew,
        FeatureKind::Kurt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Iav => "iav",
            FeatureKind::Mav => "mav",
            FeatureKind::Mmav1 => "mmav1",
            FeatureKind::Mmav2 => "mmav2",
            FeatureKind::Ssi => "ssi",
            FeatureKind::Var => "var",
            FeatureKind::Rms => "rms",
            FeatureKind::Wl => "wl",
            FeatureKind::Log => "log",
            FeatureKind::Skew => "skew",
            FeatureKind::Kurt => "kurt",
        }
    }

    pub fn index(self) -> usize {
        FeatureKind::ALL.iter().position(|&k| k == self).expect("listed")
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name().to_ascii_uppercase())
    }
}

pub const NUM_FEATURES: usize = FeatureKind::ALL.len();

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("{kind}: window has {len} samples, need at least 2")]
    DegenerateWindow { kind: FeatureKind, len: usize },
    #[error("{kind}: window is constant, higher moments are undefined")]
    ConstantWindow { kind: FeatureKind },
    #[error("{kind}: non-finite input or result")]
    NonFinite { kind: FeatureKind },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureOptions {
    /// Use `4(N−n)/N` rather than `4(n−N)/N` for the MMAV2 upper tail.
    pub mmav2_positive_tail: bool,
}

/// The eleven features of one window in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn get(&self, kind: FeatureKind) -> f64 {
        self.0[kind.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn mmav1_weight(n: usize, len: usize) -> f64 {
    let (n, len) = (n as f64, len as f64);
    if 0.25 * len <= n && n <= 0.75 * len {
        1.0
    } else {
        0.5
    }
}

fn mmav2_weight(n: usize, len: usize, positive_tail: bool) -> f64 {
    let (n, len) = (n as f64, len as f64);
    if n < 0.25 * len {
        4.0 * n / len
    } else if n > 0.75 * len {
        if positive_tail {
            4.0 * (len - n) / len
        } else {
            4.0 * (n - len) / len
        }
    } else {
        1.0
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `Σ (x − μ)^p` for `p = 2, 3, 4`.
fn central_sums(x: &[f64]) -> (f64, f64, f64) {
    let mu = mean(x);
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mu;
        let d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    (s2, s3, s4)
}

pub fn compute_feature(kind: FeatureKind, values: &[f64]) -> Result<f64, FeatureError> {
    compute_feature_with(kind, values, FeatureOptions::default())
}

pub fn compute_feature_with(
    kind: FeatureKind,
    x: &[f64],
    opts: FeatureOptions,
) -> Result<f64, FeatureError> {
    let len = x.len();
    if len < 2 {
        return Err(FeatureError::DegenerateWindow { kind, len });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite { kind });
    }
    let nf = len as f64;
    let iav = || x.iter().map(|v| v.abs()).sum::<f64>();
    let ssi = || x.iter().map(|v| v * v).sum::<f64>();
    let value = match kind {
        FeatureKind::Iav => iav(),
        FeatureKind::Mav => iav() / nf,
        FeatureKind::Mmav1 => {
            x.iter()
                .enumerate()
                .map(|(i, v)| mmav1_weight(i + 1, len) * v.abs())
                .sum::<f64>()
                / nf
        }
        FeatureKind::Mmav2 => {
            x.iter()
                .enumerate()
                .map(|(i, v)| mmav2_weight(i + 1, len, opts.mmav2_positive_tail) * v.abs())
                .sum::<f64>()
                / nf
        }
        FeatureKind::Ssi => ssi(),
        FeatureKind::Var => central_sums(x).0 / (nf - 1.0),
        FeatureKind::Rms => (ssi() / nf).sqrt(),
        FeatureKind::Wl => x.windows(2).map(|w| (w[1] - w[0]).abs()).sum(),
        FeatureKind::Log => x.iter().map(|v| v.abs().max(LOG_EPSILON).log10()).sum::<f64>() / nf,
        FeatureKind::Skew | FeatureKind::Kurt => {
            if x.iter().all(|&v| v == x[0]) {
                return Err(FeatureError::ConstantWindow { kind });
            }
            let (s2, s3, s4) = central_sums(x);
            if kind == FeatureKind::Skew {
                (s3 / nf) / (s2 / nf).powf(1.5)
            } else {
                let sample_var = s2 / (nf - 1.0);
                (s4 / nf) / (sample_var * sample_var)
            }
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(FeatureError::NonFinite { kind })
    }
}

pub fn extract_feature_vector(window: &SegmentWindow) -> Result<FeatureVector, FeatureError> {
    extract_feature_vector_with(&window.values, FeatureOptions::default())
}

pub fn extract_feature_vector_with(
    values: &[f64],
    opts: FeatureOptions,
) -> Result<FeatureVector, FeatureError> {
    let mut out = [0.0; NUM_FEATURES];
    for (slot, kind) in out.iter_mut().zip(FeatureKind::ALL) {
        *slot = compute_feature_with(kind, values, opts)?;
    }
    Ok(FeatureVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(kind: FeatureKind, x: &[f64]) -> f64 {
        compute_feature(kind, x).unwrap()
    }

    #[test]
    fn two_sample_window_values() {
        let x = [3.0, -4.0];
        assert_eq!(f(FeatureKind::Iav, &x), 7.0);
        assert_eq!(f(FeatureKind::Mav, &x), 3.5);
        assert_eq!(f(FeatureKind::Ssi, &x), 25.0);
        assert!((f(FeatureKind::Rms, &x) - 3.5355339059327378).abs() < 1e-15);
        assert_eq!(f(FeatureKind::Wl, &x), 7.0);
    }

    #[test]
    fn constant_and_symmetric_windows() {
        assert_eq!(f(FeatureKind::Wl, &[5.0, 5.0, 5.0]), 0.0);
        assert_eq!(f(FeatureKind::Skew, &[-1.0, 0.0, 1.0]), 0.0);
        assert_eq!(f(FeatureKind::Var, &[1.0, 2.0, 3.0]), 1.0);
    }

    #[test]
    fn weight_boundaries() {
        // N=4: MMAV1 weights (1,1,1,0.5); MMAV2 weights (1,1,1,0)
        // N=8: MMAV2 weights (0.5,1,1,1,1,1,-0.5,0)
        assert_eq!(f(FeatureKind::Mmav1, &[1.0; 4]), 0.875);
        assert_eq!(f(FeatureKind::Mmav2, &[1.0; 4]), 0.75);
        assert_eq!(f(FeatureKind::Mmav2, &[1.0; 8]), 0.625);
        assert_eq!(f(FeatureKind::Mmav1, &[1.0; 8]), 0.8125);
    }

    #[test]
    fn positive_tail_switch() {
        let opts = FeatureOptions {
            mmav2_positive_tail: true,
        };
        // N=8 weights become (0.5,1,1,1,1,1,0.5,0)
        let v = compute_feature_with(FeatureKind::Mmav2, &[1.0; 8], opts).unwrap();
        assert_eq!(v, 0.75);
    }

    #[test]
    fn degenerate_and_constant_windows_are_typed_errors() {
        assert_eq!(
            compute_feature(FeatureKind::Mav, &[1.0]),
            Err(FeatureError::DegenerateWindow {
                kind: FeatureKind::Mav,
                len: 1
            })
        );
        assert_eq!(
            compute_feature(FeatureKind::Kurt, &[0.1, 0.1, 0.1]),
            Err(FeatureError::ConstantWindow {
                kind: FeatureKind::Kurt
            })
        );
        let w = SegmentWindow {
            values: vec![2.0; 6],
            source_hit: 1,
            dest_hit: 2,
        };
        assert_eq!(
            extract_feature_vector(&w),
            Err(FeatureError::ConstantWindow {
                kind: FeatureKind::Skew
            })
        );
    }

    #[test]
    fn log_clamps_zero() {
        let v = f(FeatureKind::Log, &[0.0, 100.0]);
        assert!((v - (-12.0 + 2.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn vector_matches_individual_calls() {
        let x = [3.0, -4.0, 0.5, 7.25, -1.0];
        let w = SegmentWindow {
            values: x.to_vec(),
            source_hit: 3,
            dest_hit: 4,
        };
        let v = extract_feature_vector(&w).unwrap();
        for kind in FeatureKind::ALL {
            assert_eq!(v.get(kind), f(kind, &x));
        }
    }

    #[test]
    fn canonical_names() {
        let names: Vec<_> = FeatureKind::ALL.iter().map(|k| k.name()).collect();
        assert_eq!(names.join(","), "iav,mav,mmav1,mmav2,ssi,var,rms,wl,log,skew,kurt");
    }
}
