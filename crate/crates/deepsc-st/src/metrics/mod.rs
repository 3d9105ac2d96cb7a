//! Semantic-quality metrics: character/word error rates from edit
//! operations, and distribution distances (Fréchet and kernel MMD) between
//! feature matrices.

mod linalg;

pub use linalg::{symmetric_eig, symmetrize};

use crate::nn::Tensor;

use linalg::{from_eig, max_asymmetry, trace};

/// Feature-distance guideline thresholds collected from a listener survey.
/// They depend entirely on the feature extractor that produced the
/// matrices, so treat them as loose reference points, not calibrated
/// constants.
pub const REFERENCE_FDSD_ACCEPTABLE: f64 = 10.0;
pub const REFERENCE_KDSD_ACCEPTABLE: f64 = 0.012;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("reference sequence is empty; the error rate is undefined")]
    EmptyReference,
    #[error("expected a square matrix, got {0:?}")]
    NotSquare(Vec<usize>),
    #[error("matrix is not symmetric (max asymmetry {0})")]
    NotSymmetric(f64),
    #[error("matrix has a strongly negative eigenvalue: {0}")]
    NegativeEigenvalue(f64),
    #[error("feature matrices need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("feature dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Counts of a minimal edit script, plus the reference length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditOps {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_length: usize,
}

impl EditOps {
    pub fn distance(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `(S + D + I) / N` over the reference length.
    pub fn error_rate(&self) -> f64 {
        self.distance() as f64 / self.reference_length as f64
    }
}

/// Minimal-cost alignment between two sequences with unit costs.
///
/// The distance is unique; among minimal scripts the backtrace prefers
/// substitution, then deletion, then insertion.
pub fn edit_ops<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditOps {
    let (m, n) = (reference.len(), hypothesis.len());
    let mut d = vec![0usize; (m + 1) * (n + 1)];
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    for i in 0..=m {
        d[idx(i, 0)] = i;
    }
    for j in 0..=n {
        d[idx(0, j)] = j;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub_cost = usize::from(reference[i - 1] != hypothesis[j - 1]);
            d[idx(i, j)] = (d[idx(i - 1, j - 1)] + sub_cost)
                .min(d[idx(i - 1, j)] + 1)
                .min(d[idx(i, j - 1)] + 1);
        }
    }
    let (mut i, mut j) = (m, n);
    let (mut subs, mut dels, mut ins) = (0, 0, 0);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let sub_cost = usize::from(reference[i - 1] != hypothesis[j - 1]);
            if d[idx(i, j)] == d[idx(i - 1, j - 1)] + sub_cost {
                subs += sub_cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[idx(i, j)] == d[idx(i - 1, j)] + 1 {
            dels += 1;
            i -= 1;
        } else {
            ins += 1;
            j -= 1;
        }
    }
    EditOps {
        substitutions: subs,
        deletions: dels,
        insertions: ins,
        reference_length: m,
    }
}

/// Lowercases and trims surrounding whitespace before scoring.
fn normalize_text(text: &str) -> String {
    text.trim().to_lowercase()
}

/// Character error rate over character sequences including spaces.
pub fn cer(reference: &str, hypothesis: &str) -> Result<f64, MetricError> {
    let r: Vec<char> = normalize_text(reference).chars().collect();
    let h: Vec<char> = normalize_text(hypothesis).chars().collect();
    if r.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    Ok(edit_ops(&r, &h).error_rate())
}

/// Word error rate over whitespace-delimited words.
pub fn wer(reference: &str, hypothesis: &str) -> Result<f64, MetricError> {
    let rn = normalize_text(reference);
    let hn = normalize_text(hypothesis);
    let r: Vec<&str> = rn.split_whitespace().collect();
    let h: Vec<&str> = hn.split_whitespace().collect();
    if r.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    Ok(edit_ops(&r, &h).error_rate())
}

/// Principal square root of a symmetric positive-semidefinite matrix via
/// eigendecomposition. Eigenvalues in `[-1e-10, 0)` clamp to zero.
pub fn sqrtm_psd(a: &Tensor) -> Result<Tensor, MetricError> {
    let asym = max_asymmetry(a);
    if asym > 1e-8 {
        return Err(MetricError::NotSymmetric(asym));
    }
    let (w, v) = symmetric_eig(&symmetrize(a))?;
    if let Some(&bad) = w.iter().find(|&&x| x < -1e-10) {
        return Err(MetricError::NegativeEigenvalue(bad));
    }
    Ok(from_eig(&w, &v, |x| x.max(0.0).sqrt()))
}

fn check_features(d: &Tensor, d_hat: &Tensor) -> Result<(), MetricError> {
    if d.rows() < 2 {
        return Err(MetricError::TooFewRows(d.rows()));
    }
    if d_hat.rows() < 2 {
        return Err(MetricError::TooFewRows(d_hat.rows()));
    }
    if d.cols() != d_hat.cols() {
        return Err(MetricError::DimensionMismatch(d.cols(), d_hat.cols()));
    }
    Ok(())
}

fn column_means(d: &Tensor) -> Vec<f64> {
    let (u, v) = (d.rows(), d.cols());
    let mut mu = vec![0.0; v];
    for i in 0..u {
        for j in 0..v {
            mu[j] += d.at(i, j);
        }
    }
    for m in &mut mu {
        *m /= u as f64;
    }
    mu
}

/// Sample covariance with 1/(U-1) normalization.
fn covariance(d: &Tensor, mu: &[f64]) -> Tensor {
    let (u, v) = (d.rows(), d.cols());
    let mut cov = Tensor::zeros(vec![v, v]);
    for r in 0..u {
        for i in 0..v {
            let di = d.at(r, i) - mu[i];
            for j in i..v {
                let dj = d.at(r, j) - mu[j];
                let acc = cov.at(i, j) + di * dj;
                cov.set(i, j, acc);
            }
        }
    }
    let norm = 1.0 / (u as f64 - 1.0);
    for i in 0..v {
        for j in i..v {
            let val = cov.at(i, j) * norm;
            cov.set(i, j, val);
            cov.set(j, i, val);
        }
    }
    cov
}

/// Fréchet distance between Gaussian fits of two feature matrices:
/// `sqrt(||mu1 - mu2||^2 + Tr[S1 + S2 - 2 (S1 S2)^(1/2)])`, with the cross
/// term computed as `sqrtm(S1^(1/2) S2 S1^(1/2))` for symmetry.
pub fn fdsd(d: &Tensor, d_hat: &Tensor) -> Result<f64, MetricError> {
    check_features(d, d_hat)?;
    let mu1 = column_means(d);
    let mu2 = column_means(d_hat);
    let s1 = covariance(d, &mu1);
    let s2 = covariance(d_hat, &mu2);
    let s1_half = sqrtm_psd(&s1)?;
    let inner = s1_half
        .matmul(&s2)
        .expect("square matrices")
        .matmul(&s1_half)
        .expect("square matrices");
    let cross = sqrtm_psd(&symmetrize(&inner))?;
    let mean_term: f64 = mu1
        .iter()
        .zip(&mu2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let total = mean_term + trace(&s1) + trace(&s2) - 2.0 * trace(&cross);
    Ok(total.max(0.0).sqrt())
}

/// Cubic polynomial kernel `(u.v / V + 1)^3` used by the kernel distance.
pub fn polynomial_kernel(u: &[f64], v: &[f64], dim: usize) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    (dot / dim as f64 + 1.0).powi(3)
}

/// Mean computed relative to the first value, so a constant sequence
/// averages to that value exactly.
fn shifted_mean(values: &[f64]) -> f64 {
    let s = values[0];
    s + values.iter().map(|v| v - s).sum::<f64>() / values.len() as f64
}

/// Unbiased squared maximum mean discrepancy under the cubic kernel.
/// May be slightly negative by unbiasedness.
pub fn kdsd(d: &Tensor, d_hat: &Tensor) -> Result<f64, MetricError> {
    check_features(d, d_hat)?;
    let dim = d.cols();
    let (u, u_hat) = (d.rows(), d_hat.rows());
    fn row(t: &Tensor, i: usize, dim: usize) -> &[f64] {
        &t.data()[i * dim..(i + 1) * dim]
    }

    let mut within_d = Vec::with_capacity(u * (u - 1));
    for i in 0..u {
        for j in 0..u {
            if i != j {
                within_d.push(polynomial_kernel(row(d, i, dim), row(d, j, dim), dim));
            }
        }
    }
    let mut within_hat = Vec::with_capacity(u_hat * (u_hat - 1));
    for i in 0..u_hat {
        for j in 0..u_hat {
            if i != j {
                within_hat.push(polynomial_kernel(row(d_hat, i, dim), row(d_hat, j, dim), dim));
            }
        }
    }
    let mut cross = Vec::with_capacity(u * u_hat);
    for i in 0..u {
        for j in 0..u_hat {
            cross.push(polynomial_kernel(row(d, i, dim), row(d_hat, j, dim), dim));
        }
    }
    Ok(shifted_mean(&within_d) + shifted_mean(&within_hat) - 2.0 * shifted_mean(&cross))
}
