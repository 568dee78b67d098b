//! p-norms for `0 <= p <= inf` and the distances they induce.
//!
//! For `0 < p < 1` the formula `(sum |x_i|^p)^(1/p)` is not a norm (the
//! triangle inequality fails) but it still defines a ball, so those values are
//! accepted everywhere a finite `p` is. `p = 0` counts nonzero components.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The exponent of a p-norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PNorm {
    /// Counting "norm": number of nonzero components.
    Zero,
    /// Finite positive exponent.
    Finite(f64),
    /// Max norm.
    Infinity,
}

impl PNorm {
    /// Builds a norm from a raw exponent; `0` and `+inf` map to the special kinds.
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 0.0 {
            return Err(Error::param("p", format!("must be >= 0, got {p}")));
        }
        Ok(if p == 0.0 {
            PNorm::Zero
        } else if p.is_infinite() {
            PNorm::Infinity
        } else {
            PNorm::Finite(p)
        })
    }

    pub fn value(self) -> f64 {
        match self {
            PNorm::Zero => 0.0,
            PNorm::Finite(p) => p,
            PNorm::Infinity => f64::INFINITY,
        }
    }

    pub fn is_finite_positive(self) -> bool {
        matches!(self, PNorm::Finite(_))
    }

    /// Label used for corruption names in error tables and output paths,
    /// e.g. `L0`, `L0.5`, `Linf`.
    pub fn label(self) -> String {
        format!("L{self}")
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Zero => f.write_str("0"),
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let t = t
            .strip_prefix('L')
            .or_else(|| t.strip_prefix('l'))
            .unwrap_or(t);
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(PNorm::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::param("p", format!("cannot parse `{s}` as a p-norm")))?;
                PNorm::new(p)
            }
        }
    }
}

/// p-norm of a real vector. `p = 0` returns the number of nonzero components.
///
/// Finite exponents are evaluated as `m * (sum (|x_i|/m)^p)^(1/p)` with
/// `m = max |x_i|`, which keeps the sum in range for large `p` and for
/// components far from 1.
pub fn lp_norm(values: impl IntoIterator<Item = f64> + Clone, p: PNorm) -> f64 {
    match p {
        PNorm::Zero => values.into_iter().filter(|v| *v != 0.0).count() as f64,
        PNorm::Infinity => values.into_iter().fold(0.0, |m, v| m.max(v.abs())),
        PNorm::Finite(p) => {
            let max = values.clone().into_iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            if max == 0.0 || !max.is_finite() {
                return max;
            }
            let sum: f64 = values.into_iter().map(|v| (v.abs() / max).powf(p)).sum();
            max * sum.powf(1.0 / p)
        }
    }
}

/// Distance between two equally long vectors under `p`.
///
/// For `p = 0` the result is the *fraction* of differing components, the
/// same ratio convention used for L0 corruption strengths.
pub fn lp_distance_slices(a: &[f32], b: &[f32], p: PNorm) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let diffs = a.iter().zip(b).map(|(x, y)| f64::from(*x) - f64::from(*y));
    let norm = lp_norm(diffs, p);
    Ok(match p {
        PNorm::Zero if a.is_empty() => 0.0,
        PNorm::Zero => norm / a.len() as f64,
        _ => norm,
    })
}

/// Number of components an L0 corruption of ratio `epsilon` replaces in a
/// `dim`-dimensional vector: `round(epsilon * dim)`, ties away from zero.
pub fn l0_count(epsilon: f64, dim: usize) -> usize {
    (epsilon * dim as f64).round() as usize
}
