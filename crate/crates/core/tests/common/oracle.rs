//! Dense reference implementation of GP regression, written independently of
//! the library: explicit Gauss-Jordan inverse, closed-form kernels, and the
//! textbook GLS formulas. Only suitable for tiny problems.

#![allow(dead_code)]

use dtwin_core::emulator::{KernelFamily, KernelKind, MeanKind};

/// Inverse and determinant by Gauss-Jordan elimination with partial pivoting.
pub fn inverse_and_det(a: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
            .unwrap();
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        let pivot = m[c][c];
        assert!(pivot != 0.0, "singular matrix in oracle");
        det *= pivot;
        for v in m[c].iter_mut() {
            *v /= pivot;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    (m.into_iter().map(|r| r[n..].to_vec()).collect(), det)
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

#[derive(Debug, Clone)]
pub struct Hyper {
    pub kind: KernelKind,
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub alpha: f64,
    pub noise: f64,
}

pub fn kernel(h: &Hyper, x: &[f64], y: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for i in 0..x.len() {
        let l = if h.kind.ard { h.length_scales[i] } else { h.length_scales[0] };
        r2 += ((x[i] - y[i]) / l).powi(2);
    }
    let r = r2.sqrt();
    let shape = match h.kind.family {
        KernelFamily::Exponential => (-r).exp(),
        KernelFamily::SquaredExponential => (-0.5 * r2).exp(),
        KernelFamily::Matern32 => (1.0 + 3f64.sqrt() * r) * (-(3f64.sqrt()) * r).exp(),
        KernelFamily::Matern52 => {
            (1.0 + 5f64.sqrt() * r + 5.0 * r2 / 3.0) * (-(5f64.sqrt()) * r).exp()
        }
        KernelFamily::RationalQuadratic => (1.0 + r2 / (2.0 * h.alpha)).powf(-h.alpha),
    };
    h.signal_variance * shape
}

pub fn basis(kind: MeanKind, x: &[f64]) -> Vec<f64> {
    let mut h = vec![1.0];
    if kind != MeanKind::Constant {
        h.extend_from_slice(x);
    }
    if kind == MeanKind::Quadratic {
        h.extend(x.iter().map(|v| v * v));
    }
    h
}

pub struct OracleFit {
    pub lml: f64,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Profiled-GLS GP on `(x, y)`, predicted at `queries`.
pub fn gp(mean: MeanKind, h: &Hyper, x: &[Vec<f64>], y: &[f64], queries: &[Vec<f64>]) -> OracleFit {
    let n = x.len();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| kernel(h, &x[i], &x[j]) + if i == j { h.noise } else { 0.0 })
                .collect()
        })
        .collect();
    let (kinv, det) = inverse_and_det(&k);
    let hm: Vec<Vec<f64>> = x.iter().map(|xi| basis(mean, xi)).collect();
    let p = hm[0].len();
    // A = H^T K^-1 H, b = H^T K^-1 y
    let kinv_h: Vec<Vec<f64>> = (0..p)
        .map(|c| mat_vec(&kinv, &hm.iter().map(|r| r[c]).collect::<Vec<_>>()))
        .collect();
    let kinv_y = mat_vec(&kinv, y);
    let a: Vec<Vec<f64>> = (0..p)
        .map(|r| (0..p).map(|c| dot(&hm.iter().map(|row| row[r]).collect::<Vec<_>>(), &kinv_h[c])).collect())
        .collect();
    let b: Vec<f64> = (0..p).map(|r| dot(&hm.iter().map(|row| row[r]).collect::<Vec<_>>(), &kinv_y)).collect();
    let (ainv, _) = inverse_and_det(&a);
    let beta = mat_vec(&ainv, &b);
    let resid: Vec<f64> = (0..n).map(|i| y[i] - dot(&hm[i], &beta)).collect();
    let kinv_r = mat_vec(&kinv, &resid);
    let lml = -0.5 * dot(&resid, &kinv_r) - 0.5 * det.ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let mut means = Vec::new();
    let mut vars = Vec::new();
    for q in queries {
        let ks: Vec<f64> = x.iter().map(|xi| kernel(h, xi, q)).collect();
        means.push(dot(&basis(mean, q), &beta) + dot(&ks, &kinv_r));
        vars.push(kernel(h, q, q) - dot(&ks, &mat_vec(&kinv, &ks)));
    }
    OracleFit { lml, beta, mean: means, variance: vars }
}
