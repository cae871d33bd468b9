//! Low-rank linearizations `K ≈ YᵀY`.
//!
//! Three routes are provided:
//!
//! - [`one_pass_sketch`]: a randomized eigendecomposition that generates each
//!   kernel column exactly once. The test matrix is either the subsampled
//!   randomized Hadamard transform `Ω = (D·H·R)[..n]` or a Gaussian matrix.
//!   `B` is recovered from `B·(QᵀΩ) = QᵀW` so the kernel is never revisited.
//! - [`nystrom`]: uniform column sampling, `C·W_m⁺·Cᵀ` truncated to rank `r`.
//! - [`exact_truncated`]: the top-`r` eigenpairs of the materialized kernel.
//!
//! The kernel is logically zero-padded to the next power of two `N ≥ n` for
//! the Hadamard transform. Padded rows and columns are zero, so they add
//! nothing to `W = K·Ω`.

use log::warn;
use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel::{self, ColumnSource, DEFAULT_BLOCK_WIDTH, DEFAULT_DENSE_CAP};
use crate::linalg::{self, hadamard_entry, SampleIndexSet, SignDiagonal};
use crate::{rng, Error, Matrix, Result};

const F64_BYTES: usize = std::mem::size_of::<f64>();

/// Linearization route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    OnePassSrht,
    OnePassGaussian,
    Nystrom { samples: usize },
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SketchConfig {
    pub rank: usize,
    pub oversample: usize,
    pub seed: u64,
    pub block_width: usize,
    pub method: Method,
    /// Largest `n` for which the exact route may materialize `K`.
    pub dense_cap: usize,
}

impl SketchConfig {
    pub fn new(method: Method, rank: usize) -> Self {
        Self {
            rank,
            oversample: 10,
            seed: 0,
            block_width: DEFAULT_BLOCK_WIDTH,
            method,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn with_oversample(mut self, l: usize) -> Self {
        self.oversample = l;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_block_width(mut self, width: usize) -> Self {
        self.block_width = width;
        self
    }

    /// `r′ = r + l`.
    pub fn sketch_width(&self) -> usize {
        self.rank + self.oversample
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        if self.rank == 0 {
            return invalid("rank must be >= 1".into());
        }
        if self.block_width == 0 {
            return invalid("block width must be >= 1".into());
        }
        match self.method {
            Method::OnePassSrht | Method::OnePassGaussian => {
                if self.sketch_width() > n {
                    return invalid(format!(
                        "rank + oversample = {} exceeds the number of samples n = {n}",
                        self.sketch_width()
                    ));
                }
            }
            Method::Nystrom { samples } => {
                if self.rank > samples || samples > n {
                    return invalid(format!(
                        "Nyström needs rank <= samples <= n, got r = {}, m = {samples}, n = {n}",
                        self.rank
                    ));
                }
            }
            Method::Exact => {
                if self.rank > n {
                    return invalid(format!("rank {} exceeds n = {n}", self.rank));
                }
            }
        }
        Ok(())
    }
}

/// `Y` (`r × n`) with `K ≈ YᵀY`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    y: Matrix,
    eigenvalues: DVector<f64>,
    basis: Option<Matrix>,
    effective_rank: usize,
}

impl LowRankFactor {
    /// The embedding; column `i` is the linearized sample `i`.
    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn into_y(self) -> Matrix {
        self.y
    }

    /// Nonnegative, descending. For the sketch and exact routes these are the
    /// eigenvalues of `YᵀY`; for Nyström, those of the sampled block `W_m`.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal `n × r` basis `Q` (absent for Nyström).
    pub fn basis(&self) -> Option<&Matrix> {
        self.basis.as_ref()
    }

    pub fn rank(&self) -> usize {
        self.y.nrows()
    }

    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    /// Number of rows of `Y` backed by a nonzero eigenvalue.
    pub fn effective_rank(&self) -> usize {
        self.effective_rank
    }

    /// The dense approximation `YᵀY`.
    pub fn gram(&self) -> Matrix {
        self.y.tr_mul(&self.y)
    }

    /// A factor with all-zero embedding.
    pub fn zeros(rank: usize, n: usize) -> Self {
        Self {
            y: Matrix::zeros(rank, n),
            eigenvalues: DVector::zeros(rank),
            basis: None,
            effective_rank: 0,
        }
    }
}

/// Resource accounting for one linearization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SketchStats {
    /// Kernel columns generated.
    pub columns_generated: usize,
    /// High-water mark of live sketch buffers plus the current column block.
    pub peak_bytes: usize,
    /// Size of one column-block buffer.
    pub block_bytes: usize,
}

/// Tracks live buffer sizes and their high-water mark.
#[derive(Debug, Default)]
struct MemoryMeter {
    live: usize,
    peak: usize,
}

impl MemoryMeter {
    fn alloc(&mut self, entries: usize) {
        self.live += entries * F64_BYTES;
        self.peak = self.peak.max(self.live);
    }

    fn free(&mut self, entries: usize) {
        self.live -= entries * F64_BYTES;
    }
}

/// The `n × r′` test matrix `Ω`.
#[derive(Debug, Clone)]
pub enum TestMatrix {
    /// First `n` rows of `D·H·R`, applied implicitly.
    Srht {
        n: usize,
        signs: SignDiagonal,
        rows: SampleIndexSet,
    },
    Dense(Matrix),
}

impl TestMatrix {
    pub fn srht(n: usize, width: usize, seed: u64) -> Result<Self> {
        let padded = n.next_power_of_two();
        Ok(TestMatrix::Srht {
            n,
            signs: SignDiagonal::draw(seed, padded)?,
            rows: SampleIndexSet::draw(seed, padded, width)?,
        })
    }

    /// I.i.d. standard normal entries, drawn row by row.
    pub fn gaussian(n: usize, width: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, rng::STREAM_GAUSSIAN);
        let mut m = Matrix::zeros(n, width);
        for i in 0..n {
            for k in 0..width {
                m[(i, k)] = StandardNormal.sample(&mut rng);
            }
        }
        TestMatrix::Dense(m)
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            TestMatrix::Srht { n, rows, .. } => (*n, rows.len()),
            TestMatrix::Dense(m) => m.shape(),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            TestMatrix::Srht { n, signs, rows } => {
                let d = signs.signs();
                let s = rows.indices();
                Matrix::from_fn(*n, s.len(), |i, k| d[i] * hadamard_entry(i, s[k]))
            }
            TestMatrix::Dense(m) => m.clone(),
        }
    }

    /// `QᵀΩ` for `Q` of shape `n × r`.
    pub fn project(&self, q: &Matrix) -> Matrix {
        match self {
            TestMatrix::Srht { signs, rows, .. } => {
                let d = signs.signs();
                let s = rows.indices();
                let mut out = Matrix::zeros(q.ncols(), s.len());
                for (a, qa) in q.column_iter().enumerate() {
                    for (k, &sk) in s.iter().enumerate() {
                        out[(a, k)] = qa
                            .iter()
                            .enumerate()
                            .fold(0.0, |acc, (i, &v)| acc + v * d[i] * hadamard_entry(i, sk));
                    }
                }
                out
            }
            TestMatrix::Dense(m) => q.tr_mul(m),
        }
    }

    fn stored_entries(&self) -> usize {
        match self {
            TestMatrix::Srht { .. } => 0,
            TestMatrix::Dense(m) => m.len(),
        }
    }
}

/// One pass over the kernel columns producing `W = K·Ω`.
///
/// Blocks are consumed in ascending order. Row `j` of `W` depends only on
/// column `j` of `K` (symmetry), so `W` is bitwise independent of the block
/// width and the thread count.
fn accumulate_sketch<S: ColumnSource + ?Sized>(
    source: &S,
    omega: &TestMatrix,
    block_width: usize,
    meter: &mut MemoryMeter,
) -> Result<(Matrix, usize)> {
    let n = source.n();
    let (_, width) = omega.shape();
    let mut w = Matrix::zeros(n, width);
    meter.alloc(w.len());

    let block_bytes;
    match omega {
        TestMatrix::Srht { signs, rows, .. } => {
            let padded = signs.len();
            let d = signs.signs();
            let s = rows.indices();
            let mut block = vec![0.0; padded * block_width.min(n)];
            block_bytes = block.len() * F64_BYTES;
            meter.alloc(block.len());
            let mut rows_out = vec![0.0; block_width.min(n) * width];
            let mut start = 0;
            while start < n {
                let bw = block_width.min(n - start);
                block[..padded * bw]
                    .par_chunks_mut(padded)
                    .zip(rows_out[..bw * width].par_chunks_mut(width))
                    .enumerate()
                    .for_each(|(j, (col, row))| {
                        source.fill_column(start + j, &mut col[..n]);
                        col[n..].fill(0.0);
                        for (v, sign) in col[..n].iter_mut().zip(d) {
                            *v *= sign;
                        }
                        linalg::fwht(col).expect("padded length is a power of two");
                        for (r, &sk) in row.iter_mut().zip(s) {
                            *r = col[sk];
                        }
                    });
                for (j, row) in rows_out[..bw * width].chunks(width).enumerate() {
                    for (k, &v) in row.iter().enumerate() {
                        w[(start + j, k)] = v;
                    }
                }
                start += bw;
            }
            meter.free(block.len());
        }
        TestMatrix::Dense(om) => {
            let mut block = vec![0.0; n * block_width.min(n)];
            block_bytes = block.len() * F64_BYTES;
            meter.alloc(block.len());
            let mut rows_out = vec![0.0; block_width.min(n) * width];
            let mut start = 0;
            while start < n {
                let bw = block_width.min(n - start);
                block[..n * bw]
                    .par_chunks_mut(n)
                    .zip(rows_out[..bw * width].par_chunks_mut(width))
                    .enumerate()
                    .for_each(|(j, (col, row))| {
                        source.fill_column(start + j, col);
                        for (k, r) in row.iter_mut().enumerate() {
                            *r = col
                                .iter()
                                .zip(om.column(k).iter())
                                .fold(0.0, |acc, (a, b)| acc + a * b);
                        }
                    });
                for (j, row) in rows_out[..bw * width].chunks(width).enumerate() {
                    for (k, &v) in row.iter().enumerate() {
                        w[(start + j, k)] = v;
                    }
                }
                start += bw;
            }
            meter.free(block.len());
        }
    }
    Ok((w, block_bytes))
}

/// Steps after the pass: `Q` from `W`, the small solve for `B`, its
/// eigendecomposition and `Y = Σ^{1/2}·Vᵀ·Qᵀ`.
///
/// `W` is consumed. Negative eigenvalues of `B` are clamped to zero.
pub fn recover_factor(w: Matrix, omega: &TestMatrix, rank: usize) -> Result<LowRankFactor> {
    let mut meter = MemoryMeter::default();
    meter.alloc(w.len());
    recover_factor_metered(w, omega, rank, &mut meter)
}

fn recover_factor_metered(
    w: Matrix,
    omega: &TestMatrix,
    rank: usize,
    meter: &mut MemoryMeter,
) -> Result<LowRankFactor> {
    let (n, width) = w.shape();
    if omega.shape() != (n, width) {
        return Err(Error::InvalidArgument(format!(
            "W is {n}x{width} but Ω is {}x{}",
            omega.shape().0,
            omega.shape().1
        )));
    }
    let w_len = w.len();
    // U is formed while W is still held by the decomposition.
    meter.alloc(n * width);
    let (basis, qtw) = linalg::basis_and_projection(w, rank)?;
    meter.free(w_len);
    meter.free(n * width);
    meter.alloc(basis.q.len());
    if basis.is_rank_deficient() {
        warn!(
            "one-pass sketch: W has numerical rank {} < r = {rank}",
            basis.effective_rank
        );
    }

    let m = omega.project(&basis.q);
    let b = linalg::solve_small(&m, &qtw)?;
    let eig = linalg::sym_eig(&b)?;

    let lambda = eig.values.map(|v| v.max(0.0));
    // Y = Σ^{1/2} Vᵀ Qᵀ
    let mut sv = eig.vectors.transpose();
    for (i, mut row) in sv.row_iter_mut().enumerate() {
        row *= lambda[i].sqrt();
    }
    meter.alloc(rank * n);
    let y = sv * basis.q.transpose();
    let effective_rank = lambda.iter().filter(|&&v| v > 0.0).count();
    Ok(LowRankFactor {
        y,
        eigenvalues: lambda,
        basis: Some(basis.q),
        effective_rank,
    })
}

/// One-pass randomized linearization (SRHT or Gaussian test matrix).
pub fn one_pass_sketch<S: ColumnSource + ?Sized>(
    source: &S,
    cfg: &SketchConfig,
) -> Result<(LowRankFactor, SketchStats)> {
    let n = source.n();
    cfg.validate(n)?;
    let width = cfg.sketch_width();
    let omega = match cfg.method {
        Method::OnePassSrht => TestMatrix::srht(n, width, cfg.seed)?,
        Method::OnePassGaussian => TestMatrix::gaussian(n, width, cfg.seed),
        other => {
            return Err(Error::InvalidArgument(format!(
                "one_pass_sketch does not handle {other:?}"
            )))
        }
    };
    let mut meter = MemoryMeter::default();
    meter.alloc(omega.stored_entries());
    let (w, block_bytes) = accumulate_sketch(source, &omega, cfg.block_width, &mut meter)?;
    let factor = recover_factor_metered(w, &omega, cfg.rank, &mut meter)?;
    Ok((
        factor,
        SketchStats {
            columns_generated: n,
            peak_bytes: meter.peak,
            block_bytes,
        },
    ))
}

/// Eigenvalues of `W_m` below this fraction of the largest are discarded.
pub const NYSTROM_PINV_THRESHOLD: f64 = 1e-10;

/// Uniform Nyström with `m` columns, truncated to rank `r` on `W_m`.
///
/// `YᵀY = C·W_{m,r}⁺·Cᵀ`. No `√(m/n)` rescaling is applied.
pub fn nystrom<S: ColumnSource + ?Sized>(
    source: &S,
    samples: usize,
    rank: usize,
    seed: u64,
) -> Result<(LowRankFactor, SketchStats)> {
    let n = source.n();
    if rank == 0 || rank > samples || samples > n {
        return Err(Error::InvalidArgument(format!(
            "Nyström needs 1 <= rank <= samples <= n, got r = {rank}, m = {samples}, n = {n}"
        )));
    }
    let mut rng = rng::stream(seed, rng::STREAM_NYSTROM);
    let idx = rand::seq::index::sample(&mut rng, n, samples).into_vec();

    let mut c = Matrix::zeros(n, samples);
    c.as_mut_slice()
        .par_chunks_mut(n)
        .zip(idx.par_iter())
        .for_each(|(col, &j)| source.fill_column(j, col));
    let wm = Matrix::from_fn(samples, samples, |a, b| c[(idx[a], b)]);
    let wm = (&wm + wm.transpose()) * 0.5;
    let eig = linalg::dense_sym_eig(&wm)?;

    let lmax = eig.values[0].max(0.0);
    let keep = eig
        .values
        .iter()
        .take(rank)
        .take_while(|&&v| v > NYSTROM_PINV_THRESHOLD * lmax && v > 0.0)
        .count();
    if keep < rank {
        warn!("Nyström: W_m has effective rank {keep} < r = {rank}");
    }
    let mut y = Matrix::zeros(rank, n);
    for i in 0..keep {
        let ci = &c * eig.vectors.column(i);
        y.set_row(i, &(ci.transpose() / eig.values[i].sqrt()));
    }
    let eigenvalues = DVector::from_fn(rank, |i, _| if i < keep { eig.values[i] } else { 0.0 });
    let entries = n * samples + 2 * samples * samples + rank * n;
    Ok((
        LowRankFactor {
            y,
            eigenvalues,
            basis: None,
            effective_rank: keep,
        },
        SketchStats {
            columns_generated: samples,
            peak_bytes: entries * F64_BYTES,
            block_bytes: n * samples * F64_BYTES,
        },
    ))
}

/// Best rank-`r` factor from the full eigendecomposition of `K` (`n ≤ cap`).
pub fn exact_truncated<S: ColumnSource + ?Sized>(
    source: &S,
    rank: usize,
    cap: usize,
) -> Result<(LowRankFactor, SketchStats)> {
    let n = source.n();
    if rank == 0 || rank > n {
        return Err(Error::InvalidArgument(format!(
            "rank must be in [1, {n}], got {rank}"
        )));
    }
    let k = kernel::materialize(source, cap)?;
    let eig = linalg::dense_sym_eig(&k)?;
    let lambda = DVector::from_fn(rank, |i, _| eig.values[i].max(0.0));
    let u = eig.vectors.columns(0, rank).into_owned();
    let mut y = u.transpose();
    for (i, mut row) in y.row_iter_mut().enumerate() {
        row *= lambda[i].sqrt();
    }
    let effective_rank = lambda.iter().filter(|&&v| v > 0.0).count();
    Ok((
        LowRankFactor {
            y,
            eigenvalues: lambda,
            basis: Some(u),
            effective_rank,
        },
        SketchStats {
            columns_generated: n,
            peak_bytes: 2 * n * n * F64_BYTES,
            block_bytes: n * n * F64_BYTES,
        },
    ))
}

/// Dispatches on `cfg.method`.
pub fn linearize<S: ColumnSource + ?Sized>(
    source: &S,
    cfg: &SketchConfig,
) -> Result<(LowRankFactor, SketchStats)> {
    cfg.validate(source.n())?;
    match cfg.method {
        Method::OnePassSrht | Method::OnePassGaussian => one_pass_sketch(source, cfg),
        Method::Nystrom { samples } => nystrom(source, samples, cfg.rank, cfg.seed),
        Method::Exact => exact_truncated(source, cfg.rank, cfg.dense_cap),
    }
}

/// `‖K − YᵀY‖_F / ‖K‖_F`, streaming the kernel columns once.
///
/// Per-column partial sums are reduced in column order, so the value does
/// not depend on the block width or thread count. Returns 0 when `K = 0`.
pub fn approx_error<S: ColumnSource + ?Sized>(
    source: &S,
    factor: &LowRankFactor,
    block_width: usize,
) -> Result<f64> {
    let n = source.n();
    if factor.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: factor.n(),
        });
    }
    let bw = block_width.max(1).min(n.max(1));
    let y = factor.y();
    let mut block = vec![0.0; n * bw];
    let mut partial = vec![(0.0, 0.0); bw];
    let (mut diff_sq, mut k_sq) = (0.0, 0.0);
    let mut start = 0;
    while start < n {
        let width = bw.min(n - start);
        block[..n * width]
            .par_chunks_mut(n)
            .zip(partial[..width].par_iter_mut())
            .enumerate()
            .for_each(|(j, (col, out))| {
                source.fill_column(start + j, col);
                let yj = y.column(start + j);
                let mut d = 0.0;
                let mut k = 0.0;
                for (i, &kij) in col.iter().enumerate() {
                    let approx = y.column(i).dot(&yj);
                    d += (kij - approx) * (kij - approx);
                    k += kij * kij;
                }
                *out = (d, k);
            });
        for &(d, k) in &partial[..width] {
            diff_sq += d;
            k_sq += k;
        }
        start += width;
    }
    if k_sq == 0.0 {
        return Ok(if diff_sq == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((diff_sq / k_sq).sqrt())
}
