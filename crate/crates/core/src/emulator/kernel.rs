//! Stationary covariance functions.
//!
//! Every kernel is `sf2 * h(r)` with `r` the length-scale-weighted distance
//! between inputs. The ARD variants carry one length-scale per input dimension;
//! the isotropic variants share a single one.
//!
//! Hyperparameters are exposed to the optimizer as logs, ordered
//! `[ln l_1 .. ln l_d, (ln alpha), ln sf2]`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Exponential,
    SquaredExponential,
    Matern32,
    Matern52,
    RationalQuadratic,
}

impl KernelFamily {
    pub const ALL: [Self; 5] = [
        Self::Exponential,
        Self::SquaredExponential,
        Self::Matern32,
        Self::Matern52,
        Self::RationalQuadratic,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Exponential => "Exponential",
            Self::SquaredExponential => "Squared Exponential",
            Self::Matern32 => "Matern 3/2",
            Self::Matern52 => "Matern 5/2",
            Self::RationalQuadratic => "Rational Quadratic",
        }
    }

    pub fn has_shape(&self) -> bool {
        matches!(self, Self::RationalQuadratic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelKind {
    pub family: KernelFamily,
    pub ard: bool,
}

impl KernelKind {
    pub const fn iso(family: KernelFamily) -> Self {
        Self { family, ard: false }
    }

    pub const fn ard(family: KernelFamily) -> Self {
        Self { family, ard: true }
    }

    /// The ten kinds in table order: five isotropic then five ARD.
    pub fn all() -> Vec<Self> {
        KernelFamily::ALL
            .iter()
            .map(|&f| Self::iso(f))
            .chain(KernelFamily::ALL.iter().map(|&f| Self::ard(f)))
            .collect()
    }

    pub fn n_length_scales(&self, dim: usize) -> usize {
        if self.ard {
            dim
        } else {
            1
        }
    }

    pub fn n_params(&self, dim: usize) -> usize {
        self.n_length_scales(dim) + usize::from(self.family.has_shape()) + 1
    }

    /// Stable key, e.g. `ard_matern52`.
    pub fn key(&self) -> String {
        let family = match self.family {
            KernelFamily::Exponential => "exponential",
            KernelFamily::SquaredExponential => "squared_exponential",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
            KernelFamily::RationalQuadratic => "rational_quadratic",
        };
        if self.ard {
            format!("ard_{family}")
        } else {
            family.to_string()
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::all().into_iter().find(|k| k.key() == key)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ard {
            write!(f, "ARD {}", self.family.label())
        } else {
            f.write_str(self.family.label())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Kernel<T> {
    pub kind: KernelKind,
    pub signal_variance: T,
    pub length_scales: Vec<T>,
    /// Rational-quadratic `alpha`; `None` for the other families.
    pub shape: Option<T>,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(
        kind: KernelKind,
        signal_variance: T,
        length_scales: Vec<T>,
        shape: Option<T>,
    ) -> Result<Self> {
        let k = Self { kind, signal_variance, length_scales, shape };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.signal_variance) {
            return Err(TwinError::Argument("signal variance must be positive".into()));
        }
        if self.length_scales.is_empty() || !self.length_scales.iter().all(|&l| positive(l)) {
            return Err(TwinError::Argument("length-scales must be positive".into()));
        }
        if !self.kind.ard && self.length_scales.len() != 1 {
            return Err(TwinError::Argument("isotropic kernel takes one length-scale".into()));
        }
        match (self.kind.family.has_shape(), self.shape) {
            (true, Some(a)) if positive(a) => Ok(()),
            (true, _) => Err(TwinError::Argument("rational quadratic needs alpha > 0".into())),
            (false, None) => Ok(()),
            (false, Some(_)) => Err(TwinError::Argument("only rational quadratic has alpha".into())),
        }
    }

    /// Input dimension the kernel was built for (1 for isotropic kernels,
    /// which accept any dimension).
    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn n_params(&self) -> usize {
        self.length_scales.len() + usize::from(self.shape.is_some()) + 1
    }

    pub fn log_params(&self) -> Vec<T> {
        let mut p: Vec<T> = self.length_scales.iter().map(|l| l.ln()).collect();
        if let Some(a) = self.shape {
            p.push(a.ln());
        }
        p.push(self.signal_variance.ln());
        p
    }

    pub fn from_log_params(kind: KernelKind, dim: usize, params: &[T]) -> Result<Self> {
        let n_ls = kind.n_length_scales(dim);
        if params.len() != kind.n_params(dim) {
            return Err(TwinError::Argument(format!(
                "{kind} in {dim}D takes {} parameters, got {}",
                kind.n_params(dim),
                params.len()
            )));
        }
        let length_scales = params[..n_ls].iter().map(|p| p.exp()).collect();
        let shape = kind.family.has_shape().then(|| params[n_ls].exp());
        let signal_variance = params[params.len() - 1].exp();
        Ok(Self { kind, signal_variance, length_scales, shape })
    }

    #[inline]
    fn length_scale(&self, i: usize) -> T {
        if self.kind.ard {
            self.length_scales[i]
        } else {
            self.length_scales[0]
        }
    }

    /// Squared scaled distance `r^2`.
    #[inline]
    fn scaled_sq_dist(&self, x: &[T], y: &[T]) -> T {
        x.iter()
            .zip(y)
            .enumerate()
            .map(|(i, (&a, &b))| {
                let d = (a - b) / self.length_scale(i);
                d * d
            })
            .sum()
    }

    /// `h(r)` for the family, given `r^2`.
    #[inline]
    fn profile(&self, r2: T) -> T {
        let one = T::one();
        match self.kind.family {
            KernelFamily::Exponential => (-r2.sqrt()).exp(),
            KernelFamily::SquaredExponential => (-r2 * T::lit(0.5)).exp(),
            KernelFamily::Matern32 => {
                let s = T::lit(3.0f64.sqrt()) * r2.sqrt();
                (one + s) * (-s).exp()
            }
            KernelFamily::Matern52 => {
                let s = T::lit(5.0f64.sqrt()) * r2.sqrt();
                (one + s + s * s / T::lit(3.0)) * (-s).exp()
            }
            KernelFamily::RationalQuadratic => {
                let alpha = self.shape.unwrap_or_else(T::one);
                (-alpha * (r2 / (T::lit(2.0) * alpha)).ln_1p()).exp()
            }
        }
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        self.signal_variance * self.profile(self.scaled_sq_dist(x, y))
    }

    /// Kernel value plus its derivatives with respect to the log-parameters,
    /// written into `grad` (length [`Self::n_params`]).
    pub fn eval_with_grad(&self, x: &[T], y: &[T], grad: &mut [T]) -> T {
        let n_ls = self.length_scales.len();
        let sf2 = self.signal_variance;
        let r2 = self.scaled_sq_dist(x, y);
        let value = sf2 * self.profile(r2);
        let r = r2.sqrt();
        // d k / d ln l_i = sf2 * c(r) * q_i, with q_i the i-th term of r^2
        let coeff = match self.kind.family {
            KernelFamily::Exponential => {
                if r > T::zero() {
                    sf2 * (-r).exp() / r
                } else {
                    T::zero()
                }
            }
            KernelFamily::SquaredExponential => value,
            KernelFamily::Matern32 => {
                let s = T::lit(3.0f64.sqrt()) * r;
                sf2 * T::lit(3.0) * (-s).exp()
            }
            KernelFamily::Matern52 => {
                let s = T::lit(5.0f64.sqrt()) * r;
                sf2 * T::lit(5.0 / 3.0) * (T::one() + s) * (-s).exp()
            }
            KernelFamily::RationalQuadratic => {
                let alpha = self.shape.unwrap_or_else(T::one);
                let z = r2 / (T::lit(2.0) * alpha);
                value / (T::one() + z)
            }
        };
        grad[..n_ls].iter_mut().for_each(|g| *g = T::zero());
        for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
            let d = (a - b) / self.length_scale(i);
            let slot = if self.kind.ard { i } else { 0 };
            grad[slot] += coeff * d * d;
        }
        if let Some(alpha) = self.shape {
            let z = r2 / (T::lit(2.0) * alpha);
            grad[n_ls] = value * alpha * (z / (T::one() + z) - z.ln_1p());
        }
        grad[grad.len() - 1] = value;
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(kind: KernelKind) -> Kernel<f64> {
        let shape = kind.family.has_shape().then_some(1.5);
        Kernel::new(kind, 1.0, vec![1.0], shape).unwrap()
    }

    #[test]
    fn diagonal_is_signal_variance() {
        for kind in KernelKind::all() {
            let shape = kind.family.has_shape().then_some(0.7);
            let k = Kernel::new(kind, 2.5, vec![0.3], shape).unwrap();
            assert_eq!(k.eval(&[1.7], &[1.7]), 2.5);
        }
    }

    #[test]
    fn closed_form_values() {
        let se = unit(KernelKind::iso(KernelFamily::SquaredExponential));
        assert!((se.eval(&[0.0], &[1.0]) - (-0.5f64).exp()).abs() < 1e-15);
        let m32 = unit(KernelKind::iso(KernelFamily::Matern32));
        let s3 = 3.0f64.sqrt();
        assert!((m32.eval(&[0.0], &[1.0]) - (1.0 + s3) * (-s3).exp()).abs() < 1e-15);
        let m52 = unit(KernelKind::iso(KernelFamily::Matern52));
        let s5 = 5.0f64.sqrt();
        assert!((m52.eval(&[2.0], &[1.0]) - (1.0 + s5 + 5.0 / 3.0) * (-s5).exp()).abs() < 1e-15);
        let exp = unit(KernelKind::iso(KernelFamily::Exponential));
        assert!((exp.eval(&[0.0], &[2.0]) - (-2.0f64).exp()).abs() < 1e-15);
        let rq = unit(KernelKind::iso(KernelFamily::RationalQuadratic));
        assert!((rq.eval(&[0.0], &[1.0]) - (1.0 + 1.0 / 3.0f64).powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn rational_quadratic_tends_to_squared_exponential() {
        let rq = Kernel::new(KernelKind::iso(KernelFamily::RationalQuadratic), 1.0, vec![1.0], Some(1e9))
            .unwrap();
        let se = unit(KernelKind::iso(KernelFamily::SquaredExponential));
        assert!((rq.eval(&[0.0], &[1.3]) - se.eval(&[0.0], &[1.3])).abs() < 1e-8);
    }

    #[test]
    fn exponential_gradient_at_zero_distance() {
        let k = Kernel::new(KernelKind::ard(KernelFamily::Exponential), 1.0, vec![1.0, 2.0], None)
            .unwrap();
        let mut g = vec![0.0; 3];
        k.eval_with_grad(&[0.5, 0.5], &[0.5, 0.5], &mut g);
        assert_eq!(&g[..2], &[0.0, 0.0]);
        assert_eq!(g[2], 1.0);
    }

    #[test]
    fn log_param_round_trip_and_keys() {
        for kind in KernelKind::all() {
            assert_eq!(KernelKind::from_key(&kind.key()), Some(kind));
            let dim = 3;
            let ls = if kind.ard { vec![0.5, 1.0, 2.0] } else { vec![0.7] };
            let shape = kind.family.has_shape().then_some(2.0);
            let k = Kernel::<f64>::new(kind, 0.9, ls, shape).unwrap();
            let back = Kernel::from_log_params(kind, dim, &k.log_params()).unwrap();
            for (a, b) in k.log_params().iter().zip(back.log_params()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert_eq!(KernelKind::all().len(), 10);
        assert_eq!(KernelKind::ard(KernelFamily::RationalQuadratic).n_params(1), 3);
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        let se = KernelKind::iso(KernelFamily::SquaredExponential);
        assert!(Kernel::new(se, 0.0, vec![1.0], None).is_err());
        assert!(Kernel::new(se, 1.0, vec![-1.0], None).is_err());
        assert!(Kernel::new(se, 1.0, vec![1.0, 1.0], None).is_err());
        assert!(Kernel::new(KernelKind::iso(KernelFamily::RationalQuadratic), 1.0, vec![1.0], None).is_err());
    }
}
