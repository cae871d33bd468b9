//! Clustering accuracy and the error functionals of `E = K − K̂`.

use crate::{linalg, Error, Matrix, Result};

/// Fraction of samples correctly labeled under the best one-to-one matching
/// of predicted clusters to true classes.
///
/// Label values need not be dense; the confusion matrix is padded square so
/// that surplus clusters or classes simply go unmatched.
pub fn clustering_accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument(
            "accuracy of an empty labeling".into(),
        ));
    }
    let confusion = confusion_matrix(predicted, truth);
    let matched = max_weight_matching(&confusion);
    Ok(matched as f64 / predicted.len() as f64)
}

/// Square `size × size` counts, `m[p][t]` = samples predicted `p` with truth `t`.
pub fn confusion_matrix(predicted: &[usize], truth: &[usize]) -> Vec<Vec<u64>> {
    let size = predicted.iter().chain(truth).max().map_or(0, |&m| m + 1);
    let mut m = vec![vec![0u64; size]; size];
    for (&p, &t) in predicted.iter().zip(truth) {
        m[p][t] += 1;
    }
    m
}

/// Maximum total weight of a perfect matching on a square matrix
/// (Hungarian algorithm with potentials, `O(n³)`).
pub fn max_weight_matching(weights: &[Vec<u64>]) -> u64 {
    let n = weights.len();
    if n == 0 {
        return 0;
    }
    let max = weights.iter().flatten().copied().max().unwrap_or(0) as i64;
    // Minimize cost = max − weight; 1-based arrays with a virtual column 0.
    let cost = |i: usize, j: usize| max - weights[i - 1][j - 1] as i64;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| weights[row_of[j] - 1][j - 1]).sum()
}

/// Norms of the approximation error `E = K − K̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorFunctionals {
    /// `‖E‖_*`, the sum of singular values.
    pub trace_norm: f64,
    pub trace: f64,
    /// `‖E‖₂`.
    pub spectral: f64,
    /// `‖E‖_F`.
    pub frobenius: f64,
}

/// Error functionals of `k_exact − k_hat`; both must be `n × n` with `n ≤ cap`.
pub fn error_functionals(k_exact: &Matrix, k_hat: &Matrix, cap: usize) -> Result<ErrorFunctionals> {
    let n = k_exact.nrows();
    if !k_exact.is_square() || k_hat.shape() != k_exact.shape() {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k_hat.nrows(),
        });
    }
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    let e = k_exact - k_hat;
    let trace = e.trace();
    let frobenius = e.norm();
    let sv = linalg::thin_svd(e)?.sigma;
    Ok(ErrorFunctionals {
        trace_norm: sv.iter().sum(),
        trace,
        spectral: sv.iter().copied().fold(0.0, f64::max),
        frobenius,
    })
}
