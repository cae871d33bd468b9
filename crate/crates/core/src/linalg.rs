//! Dense linear-algebra primitives for the sketch.
//!
//! Hadamard matrices here are the unnormalized Sylvester construction with
//! `H[i][j] = (-1)^popcount(i & j)`, defined only for power-of-two orders.

use log::warn;
use nalgebra::{DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use crate::{rng, Error, Matrix, Result};

/// In-place fast Walsh–Hadamard transform, `v ← H·v`.
///
/// Unnormalized: applying it twice multiplies by `v.len()`.
pub fn fwht(v: &mut [f64]) -> Result<()> {
    let n = v.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut h = 1;
    while h < n {
        for chunk in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// Applies [`fwht`] to every column of `m` in parallel.
///
/// Columns are transformed independently, so results do not depend on the
/// number of worker threads.
pub fn fwht_columns(m: &mut Matrix) -> Result<()> {
    let rows = m.nrows();
    if !rows.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(rows));
    }
    if m.ncols() == 0 {
        return Ok(());
    }
    m.as_mut_slice()
        .par_chunks_mut(rows)
        .for_each(|col| fwht(col).expect("power-of-two length checked above"));
    Ok(())
}

/// Entry `(i, j)` of the Sylvester Hadamard matrix.
#[inline]
pub fn hadamard_entry(i: usize, j: usize) -> f64 {
    if (i & j).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Random ±1 diagonal `D` over the padded dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SignDiagonal {
    signs: Vec<f64>,
}

impl SignDiagonal {
    /// Draws `len` signs from the sign stream of `seed`. `len` must be a power of two.
    pub fn draw(seed: u64, len: usize) -> Result<Self> {
        if !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        let mut rng = rng::stream(seed, rng::STREAM_SIGNS);
        let signs = (0..len)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Ok(Self { signs })
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

/// Distinct indices drawn uniformly without replacement from `[0, N)`;
/// the columns of the identity kept by the subsampling matrix `R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleIndexSet {
    indices: Vec<usize>,
}

impl SampleIndexSet {
    pub fn draw(seed: u64, universe: usize, count: usize) -> Result<Self> {
        if count > universe {
            return Err(Error::InvalidArgument(format!(
                "cannot sample {count} distinct indices from {universe}"
            )));
        }
        let mut rng = rng::stream(seed, rng::STREAM_SAMPLE_ROWS);
        let indices = rand::seq::index::sample(&mut rng, universe, count).into_vec();
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Thin singular value decomposition `A = U·diag(σ)·Vᵀ` of a tall matrix,
/// singular values descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// `m × k`; columns for zero singular values are zero.
    pub u: Matrix,
    pub sigma: DVector<f64>,
    /// `k × k` orthogonal.
    pub v: Matrix,
}

const SVD_MAX_SWEEPS: usize = 64;

/// One-sided (Hestenes) Jacobi SVD of `a` (`m × k`, `k ≤ m`).
///
/// Column pairs are rotated until mutually orthogonal; accurate to working
/// precision relative to each singular value, and cheap for the thin
/// matrices used here.
pub fn thin_svd(a: Matrix) -> Result<ThinSvd> {
    let (m, k) = a.shape();
    if k > m {
        return Err(Error::InvalidArgument(format!(
            "thin_svd needs rows >= cols, got {m}x{k}"
        )));
    }
    let mut u = a;
    let mut v = Matrix::identity(k, k);
    let mut converged = k < 2;
    for _ in 0..SVD_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut u, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps: SVD_MAX_SWEEPS,
        });
    }
    let norms: Vec<f64> = u.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let sigma = DVector::from_iterator(k, order.iter().map(|&j| norms[j]));
    let u = Matrix::from_fn(m, k, |i, j| {
        let src = order[j];
        if norms[src] > 0.0 {
            u[(i, src)] / norms[src]
        } else {
            0.0
        }
    });
    let v = Matrix::from_fn(k, k, |i, j| v[(i, order[j])]);
    Ok(ThinSvd { u, sigma, v })
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (a, b) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

/// An `N × r` matrix with orthonormal columns.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    pub q: Matrix,
    /// Numerical rank of the input; columns past it are an arbitrary
    /// orthonormal completion.
    pub effective_rank: usize,
}

impl OrthonormalBasis {
    pub fn is_rank_deficient(&self) -> bool {
        self.effective_rank < self.q.ncols()
    }
}

/// The `r` leading left singular vectors of `w` (`N × r′`, `r ≤ r′ ≤ N`).
///
/// If `w` has numerical rank below `r`, the remaining columns are an
/// orthonormal completion and a warning is logged.
pub fn orthonormal_basis(w: &Matrix, r: usize) -> Result<OrthonormalBasis> {
    basis_and_projection(w.clone(), r).map(|(basis, _)| basis)
}

/// [`orthonormal_basis`] of an owned `W`, also returning `QᵀW` (`r × r′`)
/// from the singular value decomposition so `W` need not outlive it.
pub fn basis_and_projection(w: Matrix, r: usize) -> Result<(OrthonormalBasis, Matrix)> {
    let (rows, cols) = w.shape();
    if r == 0 || r > cols || cols > rows {
        return Err(Error::InvalidArgument(format!(
            "orthonormal_basis needs 1 <= r <= r' <= N, got r = {r}, W is {rows}x{cols}"
        )));
    }
    let svd = thin_svd(w)?;
    let sigma = &svd.sigma;
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let tol = smax * rows.max(cols) as f64 * f64::EPSILON;
    let effective_rank = sigma.iter().filter(|&&s| s > tol && s > 0.0).count();

    let keep = effective_rank.min(r);
    let mut q = svd.u.columns(0, r).into_owned();
    if keep < r {
        warn!("orthonormal_basis: W has effective rank {effective_rank} < {r}; completing basis");
        complete_orthonormal(&mut q, keep);
    }
    // QᵀW = QᵀU·Σ·Vᵀ
    let mut qtu = q.tr_mul(&svd.u);
    for (j, mut col) in qtu.column_iter_mut().enumerate() {
        col *= sigma[j];
    }
    let qtw = qtu * svd.v.transpose();
    Ok((OrthonormalBasis { q, effective_rank }, qtw))
}

/// Replaces columns `filled..` of `q` with unit vectors orthogonal to all
/// previous columns (two rounds of Gram–Schmidt). The current column is tried
/// first, then standard basis vectors.
fn complete_orthonormal(q: &mut Matrix, filled: usize) {
    let rows = q.nrows();
    for j in filled..q.ncols() {
        let mut best: Option<(f64, DVector<f64>)> = None;
        let candidates = std::iter::once(q.column(j).into_owned()).chain((0..rows).map(|e| {
            let mut v = DVector::zeros(rows);
            v[e] = 1.0;
            v
        }));
        for mut v in candidates {
            for _ in 0..2 {
                for k in 0..j {
                    let proj = q.column(k).dot(&v);
                    v.axpy(-proj, &q.column(k), 1.0);
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, v));
            }
            if norm > 0.7 {
                break;
            }
        }
        let (norm, v) = best.expect("rows >= 1");
        q.set_column(j, &(v / norm));
    }
}

/// Symmetric `r × r` matrix recovered by the small solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallSymmetric(Matrix);

impl SmallSymmetric {
    /// Symmetrizes `m` as `(m + mᵀ) / 2`.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidArgument(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self((m + m.transpose()) * 0.5))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

/// Condition number beyond which [`solve_small`] refuses the system.
pub const MAX_CONDITION: f64 = 1e12;

/// Least-squares `B` minimizing `‖B·M − RHS‖_F`, symmetrized.
///
/// `M` and `RHS` are `r × r′` with `r ≤ r′`; `M` must have full row rank.
pub fn solve_small(m: &Matrix, rhs: &Matrix) -> Result<SmallSymmetric> {
    let (r, rp) = m.shape();
    if rhs.shape() != (r, rp) {
        return Err(Error::InvalidArgument(format!(
            "solve_small: M is {r}x{rp} but RHS is {}x{}",
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    if r == 0 || r > rp {
        return Err(Error::InvalidArgument(format!(
            "solve_small needs 1 <= r <= r', got {r}x{rp}"
        )));
    }
    // B·M = RHS  ⇔  Mᵀ·Bᵀ = RHSᵀ; thin SVD Mᵀ = U S Vᵀ gives Bᵀ = V S⁻¹ Uᵀ RHSᵀ.
    let svd = thin_svd(m.transpose())?;
    let s = &svd.sigma;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let mut uty = svd.u.transpose() * rhs.transpose();
    for (i, mut row) in uty.row_iter_mut().enumerate() {
        row /= s[i];
    }
    let b_t = &svd.v * uty;
    SmallSymmetric::from_matrix(&b_t.transpose())
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: Matrix,
}

impl SymEig {
    pub fn reconstruct(&self) -> Matrix {
        let scaled = Matrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * self.values[j]
        });
        scaled * self.vectors.transpose()
    }

    fn sorted_descending(values: DVector<f64>, vectors: Matrix) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let values = DVector::from_iterator(values.len(), order.iter().map(|&i| values[i]));
        let vectors = Matrix::from_fn(vectors.nrows(), order.len(), |i, j| vectors[(i, order[j])]);
        Self { values, vectors }
    }
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigendecomposition of the small matrix `B = VΣVᵀ`.
pub fn sym_eig(b: &SmallSymmetric) -> Result<SymEig> {
    let n = b.dim();
    let mut a = b.matrix().clone();
    let mut v = Matrix::identity(n, n);
    let scale = a.norm();
    if scale == 0.0 {
        return Ok(SymEig::sorted_descending(DVector::zeros(n), v));
    }
    let target = f64::EPSILON * scale;
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }
    Ok(SymEig::sorted_descending(a.diagonal(), v))
}

/// Eigendecomposition of a large dense symmetric matrix (implicit QR).
pub fn dense_sym_eig(m: &Matrix) -> Result<SymEig> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(
            "dense_sym_eig needs a square matrix".into(),
        ));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or(Error::NoConvergence { sweeps: 0 })?;
    Ok(SymEig::sorted_descending(eig.eigenvalues, eig.eigenvectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn naive_hadamard(n: usize) -> Matrix {
        Matrix::from_fn(n, n, hadamard_entry)
    }

    #[test]
    fn fwht_small_cases() {
        let mut v = [1.0, 0.0];
        fwht(&mut v).unwrap();
        assert_eq!(v, [1.0, 1.0]);
        let mut v = [1.0, 1.0];
        fwht(&mut v).unwrap();
        assert_eq!(v, [2.0, 0.0]);
    }

    #[test]
    fn fwht_matches_naive_order_8() {
        let x = randn(8, 1, 3);
        let expected = naive_hadamard(8) * &x;
        let mut v: Vec<f64> = x.iter().cloned().collect();
        fwht(&mut v).unwrap();
        for (a, b) in v.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fwht_rejects_non_power_of_two() {
        let mut v = [1.0; 6];
        assert!(matches!(fwht(&mut v), Err(Error::NotPowerOfTwo(6))));
        let mut m = Matrix::zeros(6, 2);
        assert!(fwht_columns(&mut m).is_err());
    }

    #[test]
    fn fwht_columns_matches_single_column() {
        let x = randn(16, 5, 11);
        let mut m = x.clone();
        fwht_columns(&mut m).unwrap();
        for j in 0..5 {
            let mut col: Vec<f64> = x.column(j).iter().cloned().collect();
            fwht(&mut col).unwrap();
            assert_eq!(col.as_slice(), m.column(j).as_slice());
        }
    }

    #[test]
    fn sign_diagonal_is_plus_minus_one() {
        let d = SignDiagonal::draw(9, 64).unwrap();
        assert_eq!(d.len(), 64);
        assert!(d.signs().iter().all(|&s| s == 1.0 || s == -1.0));
        assert!(SignDiagonal::draw(9, 48).is_err());
    }

    #[test]
    fn sample_index_set_distinct() {
        let s = SampleIndexSet::draw(4, 32, 12).unwrap();
        let mut idx = s.indices().to_vec();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 12);
        assert!(idx.iter().all(|&i| i < 32));
        assert!(SampleIndexSet::draw(4, 8, 9).is_err());
    }

    #[test]
    fn basis_of_orthonormal_input_is_itself() {
        let w = randn(10, 3, 1).qr().q();
        let b = orthonormal_basis(&w, 3).unwrap();
        assert_eq!(b.effective_rank, 3);
        // Same span: QᵀW is orthogonal.
        let p = b.q.transpose() * &w;
        assert!(
            (p.tr_mul(&p) - Matrix::identity(3, 3)).norm() < 1e-12,
            "{p}"
        );
    }

    #[test]
    fn thin_svd_reconstructs() {
        for (rows, cols, seed) in [(30, 6, 1), (6, 6, 2), (5, 1, 3)] {
            let a = randn(rows, cols, seed);
            let svd = thin_svd(a.clone()).unwrap();
            let rec = &svd.u * Matrix::from_diagonal(&svd.sigma) * svd.v.transpose();
            assert!((rec - &a).norm() < 1e-13 * a.norm());
            assert!((svd.u.tr_mul(&svd.u) - Matrix::identity(cols, cols)).norm() < 1e-13);
            assert!((svd.v.tr_mul(&svd.v) - Matrix::identity(cols, cols)).norm() < 1e-13);
            assert!(svd.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
            let mut reference: Vec<f64> = a.singular_values().iter().copied().collect();
            reference.sort_by(|x, y| y.total_cmp(x));
            for (x, y) in svd.sigma.iter().zip(&reference) {
                assert!((x - y).abs() < 1e-12 * reference[0]);
            }
        }
        assert!(thin_svd(randn(2, 3, 4)).is_err());
    }

    #[test]
    fn thin_svd_of_rank_one_with_wide_range() {
        // A rank-one product with a large leading value; the factors must
        // recompose it to working precision.
        let u = randn(20, 1, 5).map(|v| v * v * 30.0);
        let a = &u * randn(1, 4, 6);
        let svd = thin_svd(a.clone()).unwrap();
        let rec = &svd.u * Matrix::from_diagonal(&svd.sigma) * svd.v.transpose();
        assert!((rec - &a).norm() < 1e-13 * a.norm());
        assert!((svd.sigma[0] - a.norm()).abs() < 1e-12 * a.norm());
        assert!(svd.sigma[1] < 1e-12 * svd.sigma[0]);
    }

    #[test]
    fn basis_of_rank_one() {
        let u = randn(7, 1, 2);
        let v = randn(4, 1, 3);
        let w = &u * v.transpose();
        let b = orthonormal_basis(&w, 1).unwrap();
        let expected = &u / u.norm();
        let dot = b.q.column(0).dot(&expected.column(0));
        assert!((dot.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_matches_svd_truncation() {
        let w = randn(16, 6, 5);
        let b = orthonormal_basis(&w, 4).unwrap();
        let gram = b.q.transpose() * &b.q;
        assert!((gram - Matrix::identity(4, 4)).norm() < 1e-10);

        // Oracle: rank-4 truncation through the eigendecomposition of WWᵀ.
        let wwt = &w * w.transpose();
        let eig = dense_sym_eig(&wwt).unwrap();
        let u4 = eig.vectors.columns(0, 4).into_owned();
        let w4 = &u4 * (u4.transpose() * &w);
        let projected = &b.q * (b.q.transpose() * &w);
        assert!((projected - w4).norm() < 1e-10);
    }

    #[test]
    fn rank_deficient_basis_is_completed() {
        let u = randn(8, 1, 4);
        let w = &u * randn(1, 3, 5);
        let b = orthonormal_basis(&w, 3).unwrap();
        assert_eq!(b.effective_rank, 1);
        assert!(b.is_rank_deficient());
        let gram = b.q.transpose() * &b.q;
        assert!((gram - Matrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn basis_rejects_bad_rank() {
        let w = randn(8, 3, 1);
        assert!(orthonormal_basis(&w, 4).is_err());
        assert!(orthonormal_basis(&w, 0).is_err());
        assert!(orthonormal_basis(&randn(3, 5, 1), 2).is_err());
    }

    #[test]
    fn solve_small_identity_and_scaling() {
        let a = randn(3, 3, 8);
        let s = &a + a.transpose();
        let id = Matrix::identity(3, 3);
        let b = solve_small(&id, &s).unwrap();
        assert!((b.matrix() - &s).norm() < 1e-12);
        let b = solve_small(&(&id * 2.0), &s).unwrap();
        assert!((b.matrix() - &s * 0.5).norm() < 1e-12);
    }

    #[test]
    fn solve_small_recovers_known_b() {
        let a = randn(3, 3, 21);
        let b0 = &a + a.transpose();
        let m = randn(3, 6, 22);
        let rhs = &b0 * &m;
        let b = solve_small(&m, &rhs).unwrap();
        assert!((b.matrix() - &b0).norm() < 1e-10);
    }

    #[test]
    fn solve_small_rejects_singular() {
        let mut m = randn(3, 5, 1);
        let row0 = m.row(0).into_owned();
        m.set_row(2, &row0);
        let rhs = randn(3, 5, 2);
        let err = solve_small(&m, &rhs).unwrap_err();
        assert!(matches!(err, Error::IllConditioned { condition } if condition > MAX_CONDITION));
    }

    #[test]
    fn sym_eig_diagonal_and_zero() {
        let b =
            SmallSymmetric::from_matrix(&Matrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0])))
                .unwrap();
        let e = sym_eig(&b).unwrap();
        assert_eq!(e.values.as_slice(), &[3.0, 1.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);

        let z = SmallSymmetric::from_matrix(&Matrix::zeros(4, 4)).unwrap();
        let e = sym_eig(&z).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sym_eig_reconstructs_random() {
        let a = randn(5, 5, 13);
        let b = SmallSymmetric::from_matrix(&a).unwrap();
        let e = sym_eig(&b).unwrap();
        let rel = (e.reconstruct() - b.matrix()).norm() / b.matrix().norm();
        assert!(rel < 1e-12, "{rel}");
        let gram = e.vectors.transpose() * &e.vectors;
        assert!((gram - Matrix::identity(5, 5)).norm() < 1e-12);
        assert!(e.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
        // Cross-check against the QR-iteration solver.
        let d = dense_sym_eig(b.matrix()).unwrap();
        assert!((&e.values - &d.values).norm() < 1e-12);
    }

    #[test]
    fn solve_then_eig_round_trip() {
        let q = randn(4, 4, 30).qr().q();
        let lambda = DVector::from_vec(vec![5.0, 2.0, 1.0, 0.5]);
        let b0 = &q * Matrix::from_diagonal(&lambda) * q.transpose();
        let m = randn(4, 9, 31);
        let b = solve_small(&m, &(&b0 * &m)).unwrap();
        let e = sym_eig(&b).unwrap();
        assert!((&e.values - &lambda).norm() < 1e-10);
        assert!((e.reconstruct() - &b0).norm() < 1e-10);
    }
}
