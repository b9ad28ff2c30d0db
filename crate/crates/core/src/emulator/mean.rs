use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};
use crate::scalar::Scalar;

/// Polynomial prior mean. For `d`-dimensional inputs the linear basis is
/// `[1, x_1..x_d]` and the quadratic basis appends the pure squares `x_i^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanKind {
    Constant,
    Linear,
    Quadratic,
}

impl MeanKind {
    pub const ALL: [Self; 3] = [Self::Constant, Self::Linear, Self::Quadratic];

    pub fn n_coefficients(&self, dim: usize) -> usize {
        match self {
            Self::Constant => 1,
            Self::Linear => 1 + dim,
            Self::Quadratic => 1 + 2 * dim,
        }
    }

    pub fn basis<T: Scalar>(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.push(T::one());
        if matches!(self, Self::Linear | Self::Quadratic) {
            out.extend_from_slice(x);
        }
        if matches!(self, Self::Quadratic) {
            out.extend(x.iter().map(|&v| v * v));
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Linear => "linear",
            Self::Quadratic => "quadratic",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.key() == key)
    }
}

impl fmt::Display for MeanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "Constant",
            Self::Linear => "Linear",
            Self::Quadratic => "Quadratic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MeanBasis<T> {
    pub kind: MeanKind,
    pub coefficients: Vec<T>,
}

impl<T: Scalar> MeanBasis<T> {
    pub fn new(kind: MeanKind, coefficients: Vec<T>) -> Result<Self> {
        let valid = match kind {
            MeanKind::Constant => coefficients.len() == 1,
            MeanKind::Linear => coefficients.len() >= 2,
            MeanKind::Quadratic => coefficients.len() >= 3 && coefficients.len() % 2 == 1,
        };
        if !valid {
            return Err(TwinError::Argument(format!(
                "{kind} mean cannot take {} coefficients",
                coefficients.len()
            )));
        }
        Ok(Self { kind, coefficients })
    }

    pub fn eval(&self, x: &[T]) -> T {
        let mut h = Vec::with_capacity(self.coefficients.len());
        self.kind.basis(x, &mut h);
        h.iter().zip(&self.coefficients).map(|(&a, &b)| a * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_lengths_and_values() {
        let mut h = Vec::new();
        MeanKind::Quadratic.basis(&[2.0f64], &mut h);
        assert_eq!(h, vec![1.0, 2.0, 4.0]);
        MeanKind::Linear.basis(&[2.0f64, 3.0], &mut h);
        assert_eq!(h, vec![1.0, 2.0, 3.0]);
        assert_eq!(MeanKind::Constant.n_coefficients(4), 1);
        assert_eq!(MeanKind::Quadratic.n_coefficients(1), 3);
    }

    #[test]
    fn evaluates_polynomial() {
        let m = MeanBasis::new(MeanKind::Quadratic, vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(m.eval(&[4.0]), 1.0 - 8.0 + 8.0);
        assert!(MeanBasis::new(MeanKind::Constant, vec![1.0, 2.0]).is_err());
    }
}
