//! Limited-memory BFGS with simple box projection.
//!
//! Variables sitting on a bound with the gradient pushing outward are frozen for
//! that iteration; the search direction is computed on the rest. Steps are
//! projected back into the box and accepted on a backtracking Armijo test.

use std::collections::VecDeque;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsSettings {
    pub memory: usize,
    /// Stop once the projected gradient's largest component is below this.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self { memory: 10, gradient_tolerance: 1e-5, max_iterations: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> Minimum<T> {
    /// Largest projected-gradient component at the minimum.
    pub fn projected_gradient_norm(&self, lower: &[T], upper: &[T]) -> T {
        projected(&self.x, &self.gradient, lower, upper)
            .into_iter()
            .fold(T::zero(), |m, g| m.max(g.abs()))
    }
}

fn projected<T: Scalar>(x: &[T], g: &[T], lower: &[T], upper: &[T]) -> Vec<T> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            if (xi <= lo && gi > T::zero()) || (xi >= hi && gi < T::zero()) {
                T::zero()
            } else {
                gi
            }
        })
        .collect()
}

fn clamp_into<T: Scalar>(x: &mut [T], lower: &[T], upper: &[T]) {
    for ((xi, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.max(lo).min(hi);
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Minimizes `objective` over the box `[lower, upper]`, starting from `x0`.
///
/// The objective returns `None` where it cannot be evaluated; such points are
/// treated as infinitely bad by the line search. Returns `None` only if the
/// start itself cannot be evaluated.
pub fn minimize<T, F>(
    mut objective: F,
    x0: &[T],
    lower: &[T],
    upper: &[T],
    settings: &LbfgsSettings,
) -> Option<Minimum<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Option<(T, Vec<T>)>,
{
    let dim = x0.len();
    let tol = T::lit(settings.gradient_tolerance);
    let mut x = x0.to_vec();
    clamp_into(&mut x, lower, upper);
    let (mut f, mut g) = objective(&x)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(settings.memory);
    let mut iterations = 0;
    let mut converged = false;
    let mut stalls = 0;

    while iterations < settings.max_iterations {
        let pg = projected(&x, &g, lower, upper);
        if pg.iter().all(|v| v.abs() <= tol) {
            converged = true;
            break;
        }
        let free: Vec<bool> = pg.iter().map(|&v| v != T::zero()).collect();

        // two-loop recursion on the free subspace
        let mut q: Vec<T> = pg.clone();
        let mut coeffs = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = *rho * masked_dot(s, &q, &free);
            for i in 0..dim {
                if free[i] {
                    q[i] -= a * y[i];
                }
            }
            coeffs.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let yy = masked_dot(y, y, &free);
            if yy > T::zero() {
                let gamma = masked_dot(s, y, &free) / yy;
                if gamma > T::zero() {
                    q.iter_mut().for_each(|v| *v *= gamma);
                }
            }
        }
        for ((s, y, rho), a) in history.iter().zip(coeffs.into_iter().rev()) {
            let b = *rho * masked_dot(y, &q, &free);
            for i in 0..dim {
                if free[i] {
                    q[i] += (a - b) * s[i];
                }
            }
        }
        let mut direction: Vec<T> = q.iter().map(|&v| -v).collect();
        if !(dot(&direction, &pg) < T::zero()) {
            history.clear();
            direction = pg.iter().map(|&v| -v).collect();
        }
        if history.is_empty() {
            // first step: cap the move at one unit in log space
            let largest = direction.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if largest > T::one() {
                direction.iter_mut().for_each(|v| *v /= largest);
            }
        }

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..50 {
            let mut trial: Vec<T> = x.iter().zip(&direction).map(|(&xi, &d)| xi + step * d).collect();
            clamp_into(&mut trial, lower, upper);
            let moved: Vec<T> = trial.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if decrease >= T::zero() {
                step *= T::lit(0.5);
                continue;
            }
            if let Some((ft, gt)) = objective(&trial) {
                if ft.is_finite()
                    && gt.iter().all(|v| v.is_finite())
                    && ft <= f + T::lit(1e-4) * decrease
                {
                    accepted = Some((trial, ft, gt, moved));
                    break;
                }
            }
            step *= T::lit(0.5);
        }
        iterations += 1;
        let Some((x_new, f_new, g_new, s)) = accepted else {
            // no descent along the current model; retry once from steepest descent
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back((s, y, T::one() / sy));
        }
        let improvement = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        if improvement <= T::epsilon() * T::lit(10.0) * (T::one() + f.abs()) {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    if !converged {
        converged = projected(&x, &g, lower, upper).iter().all(|v| v.abs() <= tol);
    }
    Some(Minimum { x, value: f, gradient: g, iterations, converged })
}

fn masked_dot<T: Scalar>(a: &[T], b: &[T], mask: &[bool]) -> T {
    a.iter()
        .zip(b)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((&x, &y), _)| x * y)
        .sum()
}
