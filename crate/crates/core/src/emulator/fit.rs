//! Maximum-likelihood training of an emulator.
//!
//! Kernel hyperparameters and the noise variance are optimized as logs by
//! multi-start L-BFGS; the mean coefficients are profiled out by GLS at every
//! evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gp::{lml_and_gradient, Mean, TrainedEmulator};
use super::kernel::{Kernel, KernelKind};
use super::linalg::Matrix;
use super::mean::MeanKind;
use super::optimize::{minimize, LbfgsSettings, Minimum};
use crate::error::{Result, TwinError};
use crate::scalar::Scalar;

/// Mean and kernel choice for one emulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmulatorSpec {
    pub mean: MeanKind,
    pub kernel: KernelKind,
}

impl EmulatorSpec {
    pub const fn new(mean: MeanKind, kernel: KernelKind) -> Self {
        Self { mean, kernel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub n_starts: usize,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { n_starts: 8, gradient_tolerance: 1e-5, max_iterations: 200, seed: 0 }
    }
}

/// Search box in log space, derived from the data scales.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub start_lower: Vec<T>,
    pub start_upper: Vec<T>,
}

/// Spread of each input dimension, falling back to 1 for constant columns.
fn input_ranges<T: Scalar>(inputs: &Matrix<T>) -> Vec<T> {
    inputs
        .column_bounds()
        .into_iter()
        .map(|(lo, hi)| if hi > lo { hi - lo } else { T::one() })
        .collect()
}

fn variance<T: Scalar>(y: &[T]) -> T {
    let n = T::from_usize_lossy(y.len());
    let mean = y.iter().copied().sum::<T>() / n;
    y.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n
}

impl<T: Scalar> SearchBox<T> {
    /// Hard bounds: length-scales in `[1e-3, 1e3] x range`, signal variance in
    /// `[1e-10, 1e4] x var(y)`, noise variance in `[1e-10, 10] x var(y)`,
    /// alpha in `[1e-3, 1e8]`.
    ///
    /// Starts are drawn log-uniformly from `[0.01, 10] x range`,
    /// `[1e-4, 10] x var(y)`, `[1e-8, 1] x var(y)` and `[0.1, 10]`.
    pub fn for_data(kind: KernelKind, inputs: &Matrix<T>, target_variance: T) -> Self {
        let ranges = input_ranges(inputs);
        let dim = inputs.ncols();
        let range_iso = ranges.iter().fold(T::zero(), |m, &r| m.max(r));
        let ls: Vec<T> = if kind.ard { ranges } else { vec![range_iso] };
        let (mut lower, mut upper, mut s_lo, mut s_hi) = (vec![], vec![], vec![], vec![]);
        let mut push = |base: T, bounds: (f64, f64), start: (f64, f64)| {
            lower.push((base * T::lit(bounds.0)).ln());
            upper.push((base * T::lit(bounds.1)).ln());
            s_lo.push((base * T::lit(start.0)).ln());
            s_hi.push((base * T::lit(start.1)).ln());
        };
        debug_assert_eq!(ls.len(), kind.n_length_scales(dim));
        for &r in &ls {
            push(r, (1e-3, 1e3), (1e-2, 10.0));
        }
        if kind.family.has_shape() {
            push(T::one(), (1e-3, 1e8), (0.1, 10.0));
        }
        push(target_variance, (1e-10, 1e4), (1e-4, 10.0));
        push(target_variance, (1e-10, 10.0), (1e-8, 1.0));
        Self { lower, upper, start_lower: s_lo, start_upper: s_hi }
    }

    pub fn draw_start<R: Rng>(&self, rng: &mut R) -> Vec<T> {
        self.start_lower
            .iter()
            .zip(&self.start_upper)
            .map(|(&lo, &hi)| {
                let u: f64 = rng.random();
                lo + (hi - lo) * T::lit(u)
            })
            .collect()
    }
}

fn split_params<T: Scalar>(kind: KernelKind, dim: usize, params: &[T]) -> Result<(Kernel<T>, T)> {
    let n = params.len();
    let kernel = Kernel::from_log_params(kind, dim, &params[..n - 1])?;
    Ok((kernel, params[n - 1].exp()))
}

/// Targets with no spread cannot inform the kernel. Such data get a prior-mean
/// emulator with the signal and noise variances at their lower bounds.
fn degenerate_fit<T: Scalar>(
    spec: EmulatorSpec,
    inputs: &Matrix<T>,
    targets: &[T],
    seed: u64,
) -> Result<TrainedEmulator<T>> {
    let level = targets[0];
    let reference = (level * level).max(T::one());
    let floor = reference * T::lit(1e-10);
    let dim = inputs.ncols();
    let ranges = input_ranges(inputs);
    let length_scales = if spec.kernel.ard {
        ranges
    } else {
        vec![ranges.iter().fold(T::zero(), |m, &r| m.max(r))]
    };
    debug_assert_eq!(length_scales.len(), spec.kernel.n_length_scales(dim));
    let shape = spec.kernel.family.has_shape().then(T::one);
    let kernel = Kernel::new(spec.kernel, floor, length_scales, shape)?;
    TrainedEmulator::condition(
        Mean::Profiled(spec.mean),
        kernel,
        floor,
        inputs.clone(),
        targets.to_vec(),
        seed,
    )
}

/// Fits one emulator by multi-start maximization of the log marginal
/// likelihood. Starts are evaluated in parallel; the result depends only on
/// the data and `settings.seed`.
pub fn fit<T: Scalar>(
    spec: EmulatorSpec,
    inputs: &Matrix<T>,
    targets: &[T],
    settings: &FitSettings,
) -> Result<TrainedEmulator<T>> {
    if inputs.nrows() < 2 || inputs.nrows() != targets.len() {
        return Err(TwinError::Argument(format!(
            "fit needs at least 2 aligned training points, got {} inputs and {} targets",
            inputs.nrows(),
            targets.len()
        )));
    }
    if settings.n_starts == 0 {
        return Err(TwinError::Argument("at least one optimizer start is required".into()));
    }
    let y_var = variance(targets);
    let y_scale = targets.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if !(y_var > T::lit(1e-28) * (T::one() + y_scale * y_scale)) {
        return degenerate_fit(spec, inputs, targets, settings.seed);
    }

    let dim = inputs.ncols();
    let bounds = SearchBox::for_data(spec.kernel, inputs, y_var);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let starts: Vec<Vec<T>> = (0..settings.n_starts).map(|_| bounds.draw_start(&mut rng)).collect();
    let lbfgs = LbfgsSettings {
        gradient_tolerance: settings.gradient_tolerance,
        max_iterations: settings.max_iterations,
        ..Default::default()
    };
    let mean = Mean::Profiled(spec.mean);
    let objective = |p: &[T]| -> Option<(T, Vec<T>)> {
        let (kernel, noise) = split_params(spec.kernel, dim, p).ok()?;
        let (lml, grad) = lml_and_gradient(&mean, &kernel, noise, inputs, targets).ok()?;
        Some((-lml, grad.into_iter().map(|g| -g).collect()))
    };

    let results: Vec<Option<Minimum<T>>> = starts
        .par_iter()
        .map(|x0| minimize(objective, x0, &bounds.lower, &bounds.upper, &lbfgs))
        .collect();
    let best = results
        .into_iter()
        .flatten()
        .filter(|m| m.value.is_finite())
        .fold(None::<Minimum<T>>, |best, m| match best {
            Some(b) if b.value <= m.value => Some(b),
            _ => Some(m),
        })
        .ok_or_else(|| {
            TwinError::OptimizationFailed(format!(
                "all {} starts failed for {} mean with {} kernel",
                settings.n_starts, spec.mean, spec.kernel
            ))
        })?;

    let (kernel, noise) = split_params(spec.kernel, dim, &best.x)?;
    TrainedEmulator::condition(mean, kernel, noise, inputs.clone(), targets.to_vec(), settings.seed)
}

/// Independent-output fit: each target series gets its own emulator with the
/// same specification and settings, so each channel equals a separate
/// [`fit`] call.
pub fn fit_multioutput<T: Scalar>(
    spec: EmulatorSpec,
    inputs: &Matrix<T>,
    targets: &[Vec<T>],
    settings: &FitSettings,
) -> Result<Vec<TrainedEmulator<T>>> {
    if targets.iter().any(|t| t.len() != inputs.nrows()) {
        return Err(TwinError::Argument("every output must share the input grid".into()));
    }
    targets.par_iter().map(|y| fit(spec, inputs, y, settings)).collect()
}
