//! Dense row-major matrices and the Cholesky machinery the GP needs.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TwinError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TwinError::Argument(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Column vector of scalar inputs.
    pub fn column(values: &[T]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TwinError::Argument("ragged rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn add_diagonal(&mut self, v: T) {
        for i in 0..self.rows.min(self.cols) {
            self.data[i * self.cols + i] += v;
        }
    }

    /// Per-column `(min, max)`.
    pub fn column_bounds(&self) -> Vec<(T, T)> {
        (0..self.cols)
            .map(|j| {
                (0..self.rows).fold((T::infinity(), T::neg_infinity()), |(lo, hi), i| {
                    let v = self.get(i, j);
                    (lo.min(v), hi.max(v))
                })
            })
            .collect()
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    factor: Matrix<T>,
    /// Diagonal shift that was needed for the factorization to succeed.
    pub jitter: T,
}

fn try_cholesky<T: Scalar>(a: &Matrix<T>, shift: T) -> Option<Matrix<T>> {
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.data[j * n..j * n + j];
        let mut d = a.get(j, j) + shift - lj.iter().map(|&v| v * v).sum::<T>();
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        d = d.sqrt();
        l.data[j * n + j] = d;
        for i in (j + 1)..n {
            let (head, tail) = l.data.split_at_mut(i * n);
            let lj = &head[j * n..j * n + j];
            let li = &tail[..j];
            let dot: T = li.iter().zip(lj).map(|(&x, &y)| x * y).sum();
            tail[j] = (a.get(i, j) - dot) / d;
        }
    }
    Some(l)
}

impl<T: Scalar> Cholesky<T> {
    /// Factorizes `a`, first as given and then with a diagonal jitter of
    /// `1e-10 * trace / n`, escalated tenfold up to `1e-4 * trace / n`.
    pub fn new_with_jitter(a: &Matrix<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(TwinError::Argument("Cholesky needs a square matrix".into()));
        }
        if let Some(factor) = try_cholesky(a, T::zero()) {
            return Ok(Self { factor, jitter: T::zero() });
        }
        let n = a.nrows().max(1);
        let scale = (a.trace() / T::from_usize_lossy(n)).abs().max(T::min_positive_value());
        let mut jitter = scale * T::lit(1e-10);
        let max_jitter = scale * T::lit(1e-4);
        while jitter <= max_jitter * T::lit(1.000001) {
            if let Some(factor) = try_cholesky(a, jitter) {
                return Ok(Self { factor, jitter });
            }
            jitter *= T::lit(10.0);
        }
        Err(TwinError::NotPositiveDefinite { jitter: max_jitter.as_f64() })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.factor
    }

    /// `log |A|`
    pub fn log_det(&self) -> T {
        T::lit(2.0) * (0..self.dim()).map(|i| self.factor.get(i, i).ln()).sum::<T>()
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let row = &self.factor.data[i * n..i * n + i];
            let dot: T = row.iter().zip(&b[..i]).map(|(&l, &x)| l * x).sum();
            b[i] = (b[i] - dot) / self.factor.data[i * n + i];
        }
    }

    /// Solves `L^T x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in (i + 1)..n {
                acc -= self.factor.data[k * n + i] * b[k];
            }
            b[i] = acc / self.factor.data[i * n + i];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `A^{-1}`, assembled from the inverse of the triangular factor.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        // rows of linv^T are columns of linv; build linv column by column
        let mut linv = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            // forward substitution starting at j (entries above are zero)
            for i in j..n {
                let row = &self.factor.data[i * n..i * n + i];
                let dot: T = (j..i).map(|k| row[k] * e[k]).sum();
                e[i] = (e[i] - dot) / self.factor.data[i * n + i];
            }
            for (i, v) in e.into_iter().enumerate().skip(j) {
                linv.data[i * n + j] = v;
            }
        }
        // A^{-1} = linv^T linv
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let start = i.max(j);
                let mut acc = T::zero();
                for k in start..n {
                    acc += linv.data[k * n + i] * linv.data[k * n + j];
                }
                inv.data[i * n + j] = acc;
                inv.data[j * n + i] = acc;
            }
        }
        inv
    }
}
