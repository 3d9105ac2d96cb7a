//! Small dense symmetric-matrix helpers for the feature distances.

use crate::nn::Tensor;

use super::MetricError;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns;
/// `A = V diag(w) V^T`.
pub fn symmetric_eig(a: &Tensor) -> Result<(Vec<f64>, Tensor), MetricError> {
    let n = a.rows();
    if a.shape() != [n, n] {
        return Err(MetricError::NotSquare(a.shape().to_vec()));
    }
    let mut m = a.clone();
    let mut v = Tensor::zeros(vec![n, n]);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let frob: f64 = m.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = (frob * 1e-14).max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(m.at(p, q).abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.at(p, q);
                if apq.abs() <= tol {
                    continue;
                }
                let theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.at(k, p);
                    let mkq = m.at(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.at(p, k);
                    let mqk = m.at(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let w = (0..n).map(|i| m.at(i, i)).collect();
    Ok((w, v))
}

/// Rebuilds `V diag(f(w)) V^T`.
pub fn from_eig(w: &[f64], v: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let n = w.len();
    let mut out = Tensor::zeros(vec![n, n]);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (k, &wk) in w.iter().enumerate() {
                acc += v.at(i, k) * f(wk) * v.at(j, k);
            }
            out.set(i, j, acc);
        }
    }
    out
}

pub fn max_asymmetry(a: &Tensor) -> f64 {
    let n = a.rows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a.at(i, j) - a.at(j, i)).abs());
        }
    }
    worst
}

/// Averages a matrix with its transpose.
pub fn symmetrize(a: &Tensor) -> Tensor {
    let n = a.rows();
    let mut out = a.clone();
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, 0.5 * (a.at(i, j) + a.at(j, i)));
        }
    }
    out
}

pub fn trace(a: &Tensor) -> f64 {
    (0..a.rows()).map(|i| a.at(i, i)).sum()
}
