//! Exact GP regression: conditioning, log marginal likelihood, its gradient,
//! and the posterior predictive.
//!
//! When the mean is [`Mean::Profiled`], its coefficients are the generalized
//! least squares estimate for the current covariance, so the likelihood is the
//! profile likelihood over `beta`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::linalg::{Cholesky, Matrix};
use super::mean::{MeanBasis, MeanKind};
use crate::error::{Result, TwinError};
use crate::scalar::Scalar;

/// How the prior mean enters the likelihood.
#[derive(Debug, Clone, PartialEq)]
pub enum Mean<T> {
    /// Coefficients fixed in advance.
    Fixed(MeanBasis<T>),
    /// Coefficients estimated by GLS at every evaluation.
    Profiled(MeanKind),
}

impl<T: Scalar> From<MeanBasis<T>> for Mean<T> {
    fn from(m: MeanBasis<T>) -> Self {
        Self::Fixed(m)
    }
}

impl<T: Scalar> From<MeanKind> for Mean<T> {
    fn from(k: MeanKind) -> Self {
        Self::Profiled(k)
    }
}

fn check_data<T: Scalar>(inputs: &Matrix<T>, targets: &[T]) -> Result<()> {
    if inputs.nrows() == 0 {
        return Err(TwinError::Argument("at least one training point is required".into()));
    }
    if inputs.nrows() != targets.len() {
        return Err(TwinError::Argument(format!(
            "{} inputs but {} targets",
            inputs.nrows(),
            targets.len()
        )));
    }
    if inputs.ncols() == 0 {
        return Err(TwinError::Argument("inputs have zero dimension".into()));
    }
    if !inputs.as_slice().iter().chain(targets).all(|v| v.is_finite()) {
        return Err(TwinError::Argument("training data must be finite".into()));
    }
    Ok(())
}

/// `K + noise * I` over the training inputs.
pub fn gram<T: Scalar>(kernel: &Kernel<T>, inputs: &Matrix<T>, noise_variance: T) -> Matrix<T> {
    let n = inputs.nrows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(inputs.row(i), inputs.row(j));
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k.add_diagonal(noise_variance);
    k
}

/// Result of conditioning the GP on data.
#[derive(Debug, Clone)]
pub(crate) struct Conditioned<T> {
    pub chol: Cholesky<T>,
    pub beta: Vec<T>,
    /// `(K + noise I)^{-1} (y - H beta)`
    pub alpha: Vec<T>,
    pub lml: T,
}

fn basis_matrix<T: Scalar>(kind: MeanKind, inputs: &Matrix<T>) -> Matrix<T> {
    let n = inputs.nrows();
    let p = kind.n_coefficients(inputs.ncols());
    let mut h = Matrix::zeros(n, p);
    let mut row = Vec::with_capacity(p);
    for i in 0..n {
        kind.basis(inputs.row(i), &mut row);
        for (j, &v) in row.iter().enumerate() {
            h.set(i, j, v);
        }
    }
    h
}

/// GLS coefficients `(H^T K^-1 H)^-1 H^T K^-1 y`, with the columns of `H`
/// equilibrated before the small normal-equation solve.
fn gls_coefficients<T: Scalar>(
    kind: MeanKind,
    inputs: &Matrix<T>,
    targets: &[T],
    chol: &Cholesky<T>,
) -> Result<Vec<T>> {
    let h = basis_matrix(kind, inputs);
    let (n, p) = (h.nrows(), h.ncols());
    if n < p {
        return Err(TwinError::SingularMeanBasis);
    }
    let scales: Vec<T> = (0..p)
        .map(|j| {
            let m = (0..n).fold(T::zero(), |m, i| m.max(h.get(i, j).abs()));
            if m > T::zero() {
                m
            } else {
                T::one()
            }
        })
        .collect();
    // whitened columns L^{-1} H D^{-1}
    let mut w = Vec::with_capacity(p);
    for (j, &scale) in scales.iter().enumerate() {
        let mut col: Vec<T> = (0..n).map(|i| h.get(i, j) / scale).collect();
        chol.solve_lower_in_place(&mut col);
        w.push(col);
    }
    let mut z = targets.to_vec();
    chol.solve_lower_in_place(&mut z);
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>();
    let mut a = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let v = dot(&w[i], &w[j]);
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    let rhs: Vec<T> = w.iter().map(|c| dot(c, &z)).collect();
    let normal = Cholesky::new_with_jitter(&a).map_err(|_| TwinError::SingularMeanBasis)?;
    let scaled = normal.solve(&rhs);
    let beta: Vec<T> = scaled.iter().zip(&scales).map(|(&b, &s)| b / s).collect();
    if beta.iter().all(|b| b.is_finite()) {
        Ok(beta)
    } else {
        Err(TwinError::SingularMeanBasis)
    }
}

pub(crate) fn condition<T: Scalar>(
    mean: &Mean<T>,
    kernel: &Kernel<T>,
    noise_variance: T,
    inputs: &Matrix<T>,
    targets: &[T],
) -> Result<Conditioned<T>> {
    check_data(inputs, targets)?;
    if !(noise_variance >= T::zero() && noise_variance.is_finite()) {
        return Err(TwinError::Argument("noise variance must be non-negative".into()));
    }
    let chol = Cholesky::new_with_jitter(&gram(kernel, inputs, noise_variance))?;
    let beta = match mean {
        Mean::Fixed(m) => {
            if m.coefficients.len() != m.kind.n_coefficients(inputs.ncols()) {
                return Err(TwinError::Argument(
                    "mean coefficients do not match the input dimension".into(),
                ));
            }
            m.coefficients.clone()
        }
        Mean::Profiled(kind) => gls_coefficients(*kind, inputs, targets, &chol)?,
    };
    let kind = match mean {
        Mean::Fixed(m) => m.kind,
        Mean::Profiled(k) => *k,
    };
    let mut h = Vec::new();
    let residual: Vec<T> = (0..inputs.nrows())
        .map(|i| {
            kind.basis(inputs.row(i), &mut h);
            targets[i] - h.iter().zip(&beta).map(|(&a, &b)| a * b).sum::<T>()
        })
        .collect();
    let mut u = residual;
    chol.solve_lower_in_place(&mut u);
    let fit_term: T = u.iter().map(|&v| v * v).sum();
    let mut alpha = u;
    chol.solve_upper_in_place(&mut alpha);
    let n = T::from_usize_lossy(inputs.nrows());
    let lml = -T::lit(0.5) * (fit_term + chol.log_det() + n * T::lit(TAU.ln()));
    if !lml.is_finite() {
        return Err(TwinError::NotPositiveDefinite { jitter: chol.jitter.as_f64() });
    }
    Ok(Conditioned { chol, beta, alpha, lml })
}

/// `log N(y | mu(X), K + noise I)`, computed through the Cholesky factor.
pub fn log_marginal_likelihood<T: Scalar>(
    mean: &Mean<T>,
    kernel: &Kernel<T>,
    noise_variance: T,
    inputs: &Matrix<T>,
    targets: &[T],
) -> Result<T> {
    Ok(condition(mean, kernel, noise_variance, inputs, targets)?.lml)
}

/// Log marginal likelihood and its gradient with respect to
/// `[kernel log-params.., ln noise_variance]`.
///
/// Uses `d L / d theta = 0.5 tr((a a^T - K^-1) dK/d theta)`. For a profiled
/// mean the GLS coefficients are stationary in `beta`, so the same expression
/// holds with the profiled residual.
pub fn lml_and_gradient<T: Scalar>(
    mean: &Mean<T>,
    kernel: &Kernel<T>,
    noise_variance: T,
    inputs: &Matrix<T>,
    targets: &[T],
) -> Result<(T, Vec<T>)> {
    let c = condition(mean, kernel, noise_variance, inputs, targets)?;
    let n = inputs.nrows();
    let n_kernel = kernel.n_params();
    let kinv = c.chol.inverse();
    let half = T::lit(0.5);
    let mut grad = vec![T::zero(); n_kernel + 1];
    let mut dk = vec![T::zero(); n_kernel];
    let mut trace_w = T::zero();
    for i in 0..n {
        let xi = inputs.row(i);
        for j in 0..=i {
            let w = c.alpha[i] * c.alpha[j] - kinv.get(i, j);
            kernel.eval_with_grad(xi, inputs.row(j), &mut dk);
            let weight = if i == j { half * w } else { w };
            for (g, &d) in grad.iter_mut().zip(&dk) {
                *g += weight * d;
            }
            if i == j {
                trace_w += w;
            }
        }
    }
    grad[n_kernel] = half * noise_variance * trace_w;
    Ok((c.lml, grad))
}

pub fn lml_gradient<T: Scalar>(
    mean: &Mean<T>,
    kernel: &Kernel<T>,
    noise_variance: T,
    inputs: &Matrix<T>,
    targets: &[T],
) -> Result<Vec<T>> {
    Ok(lml_and_gradient(mean, kernel, noise_variance, inputs, targets)?.1)
}

/// Posterior mean and variances at a set of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub mean: Vec<T>,
    /// Variance of the latent function.
    pub latent_variance: Vec<T>,
    /// Noise variance of the emulator; add it to predict new observations.
    pub noise_variance: T,
}

impl<T: Scalar> Prediction<T> {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn observation_variance(&self) -> Vec<T> {
        self.latent_variance.iter().map(|&v| v + self.noise_variance).collect()
    }

    fn band(&self, variances: &[T], z: T) -> Vec<(T, T)> {
        self.mean
            .iter()
            .zip(variances)
            .map(|(&m, &v)| {
                let half = z * v.sqrt();
                (m - half, m + half)
            })
            .collect()
    }

    /// `mean +- z * sqrt(latent variance)`
    pub fn latent_band(&self, z: T) -> Vec<(T, T)> {
        self.band(&self.latent_variance, z)
    }

    /// `mean +- z * sqrt(latent variance + noise variance)`
    pub fn observation_band(&self, z: T) -> Vec<(T, T)> {
        self.band(&self.observation_variance(), z)
    }
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// A GP conditioned on its training data with fixed hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "EmulatorDocument<T>", into = "EmulatorDocument<T>")]
#[serde(bound = "T: Scalar")]
pub struct TrainedEmulator<T: Scalar> {
    mean: MeanBasis<T>,
    kernel: Kernel<T>,
    noise_variance: T,
    inputs: Matrix<T>,
    targets: Vec<T>,
    log_marginal_likelihood: T,
    seed: u64,
    chol: Cholesky<T>,
    alpha: Vec<T>,
}

/// Serialized form of [`TrainedEmulator`]; the factorization is rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EmulatorDocument<T: Scalar> {
    pub mean: MeanBasis<T>,
    pub kernel: Kernel<T>,
    pub noise_variance: T,
    pub inputs: Matrix<T>,
    pub targets: Vec<T>,
    pub log_marginal_likelihood: T,
    pub seed: u64,
}

impl<T: Scalar> TryFrom<EmulatorDocument<T>> for TrainedEmulator<T> {
    type Error = TwinError;
    fn try_from(doc: EmulatorDocument<T>) -> Result<Self> {
        doc.kernel.validate()?;
        let mut em = TrainedEmulator::condition(
            Mean::Fixed(doc.mean),
            doc.kernel,
            doc.noise_variance,
            doc.inputs,
            doc.targets,
            doc.seed,
        )?;
        em.log_marginal_likelihood = doc.log_marginal_likelihood;
        Ok(em)
    }
}

impl<T: Scalar> From<TrainedEmulator<T>> for EmulatorDocument<T> {
    fn from(em: TrainedEmulator<T>) -> Self {
        Self {
            mean: em.mean,
            kernel: em.kernel,
            noise_variance: em.noise_variance,
            inputs: em.inputs,
            targets: em.targets,
            log_marginal_likelihood: em.log_marginal_likelihood,
            seed: em.seed,
        }
    }
}

impl<T: Scalar> TrainedEmulator<T> {
    /// Conditions on `(inputs, targets)` with the given hyperparameters,
    /// estimating the mean coefficients by GLS when `mean` is profiled.
    pub fn condition(
        mean: Mean<T>,
        kernel: Kernel<T>,
        noise_variance: T,
        inputs: Matrix<T>,
        targets: Vec<T>,
        seed: u64,
    ) -> Result<Self> {
        let c = condition(&mean, &kernel, noise_variance, &inputs, &targets)?;
        let kind = match &mean {
            Mean::Fixed(m) => m.kind,
            Mean::Profiled(k) => *k,
        };
        Ok(Self {
            mean: MeanBasis { kind, coefficients: c.beta },
            kernel,
            noise_variance,
            inputs,
            targets,
            log_marginal_likelihood: c.lml,
            seed,
            chol: c.chol,
            alpha: c.alpha,
        })
    }

    pub fn mean(&self) -> &MeanBasis<T> {
        &self.mean
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    pub fn inputs(&self) -> &Matrix<T> {
        &self.inputs
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn log_marginal_likelihood(&self) -> T {
        self.log_marginal_likelihood
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Diagonal jitter the factorization needed.
    pub fn jitter(&self) -> T {
        self.chol.jitter
    }

    /// Lower-triangular factor of `K + (noise + jitter) I`.
    pub fn factor(&self) -> &Matrix<T> {
        self.chol.factor()
    }

    /// Number of free parameters: mean coefficients, kernel hyperparameters and
    /// the noise variance.
    pub fn n_params(&self) -> usize {
        self.mean.coefficients.len() + self.kernel.n_params() + 1
    }

    pub fn with_kernel_kind(mut self, kind: super::kernel::KernelKind) -> Self {
        self.kernel.kind = kind;
        self
    }

    pub fn predict_point(&self, x: &[T]) -> (T, T) {
        let n = self.inputs.nrows();
        let mut k_star: Vec<T> = (0..n).map(|i| self.kernel.eval(self.inputs.row(i), x)).collect();
        let mean = self.mean.eval(x)
            + k_star.iter().zip(&self.alpha).map(|(&a, &b)| a * b).sum::<T>();
        self.chol.solve_lower_in_place(&mut k_star);
        let explained: T = k_star.iter().map(|&v| v * v).sum();
        let variance = (self.kernel.eval(x, x) - explained).max(T::zero());
        (mean, variance)
    }

    /// Posterior at each row of `queries`.
    pub fn predict(&self, queries: &Matrix<T>) -> Result<Prediction<T>> {
        if queries.ncols() != self.inputs.ncols() {
            return Err(TwinError::Argument(format!(
                "query dimension {} does not match training dimension {}",
                queries.ncols(),
                self.inputs.ncols()
            )));
        }
        let (mean, latent_variance) =
            (0..queries.nrows()).map(|i| self.predict_point(queries.row(i))).unzip();
        Ok(Prediction { mean, latent_variance, noise_variance: self.noise_variance })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
