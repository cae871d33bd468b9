//! Kernel functions and streamed kernel-matrix columns.
//!
//! Nothing in here stores the full `n × n` kernel matrix unless asked to via
//! [`materialize`]; algorithms consume columns through [`ColumnSource`].

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// Default number of kernel columns generated per block.
pub const DEFAULT_BLOCK_WIDTH: usize = 256;

/// Default largest `n` for which a dense `n × n` kernel may be formed.
pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// Kernel family and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `(⟨x, y⟩ + offset)^degree`; homogeneous when `offset == 0`.
    Polynomial { degree: u32, offset: f64 },
    /// `exp(−gamma ‖x − y‖²)`.
    Rbf { gamma: f64 },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Polynomial {
            degree: 2,
            offset: 0.0,
        }
    }
}

impl KernelSpec {
    pub fn polynomial(degree: u32, offset: f64) -> Result<Self> {
        let spec = KernelSpec::Polynomial { degree, offset };
        spec.validate()?;
        Ok(spec)
    }

    pub fn homogeneous(degree: u32) -> Result<Self> {
        Self::polynomial(degree, 0.0)
    }

    pub fn rbf(gamma: f64) -> Result<Self> {
        let spec = KernelSpec::Rbf { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Polynomial { degree, offset } => {
                if degree < 1 {
                    return Err(Error::InvalidArgument(
                        "polynomial degree must be >= 1".into(),
                    ));
                }
                if !(offset >= 0.0 && offset.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "polynomial offset must be finite and >= 0, got {offset}"
                    )));
                }
            }
            KernelSpec::Rbf { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "rbf gamma must be finite and > 0, got {gamma}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Kernel value from the inner product and the two squared norms.
    #[inline]
    fn from_parts(&self, dot: f64, sq_x: f64, sq_y: f64) -> f64 {
        match *self {
            KernelSpec::Polynomial { degree, offset } => (dot + offset).powi(degree as i32),
            KernelSpec::Rbf { gamma } => {
                let dist = (sq_x + sq_y - 2.0 * dot).max(0.0);
                (-gamma * dist).exp()
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelSpec::Polynomial { degree, offset } if offset == 0.0 => {
                write!(f, "poly:{degree}")
            }
            KernelSpec::Polynomial { degree, offset } => write!(f, "poly:{degree}:{offset}"),
            KernelSpec::Rbf { gamma } => write!(f, "rbf:{gamma}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Parses `poly:D[:GAMMA]` or `rbf:GAMMA`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidArgument(format!(
                "bad kernel '{s}', want poly:D[:GAMMA] or rbf:GAMMA"
            ))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["poly", d] => Self::homogeneous(d.parse().map_err(|_| bad())?),
            ["poly", d, g] => {
                Self::polynomial(d.parse().map_err(|_| bad())?, g.parse().map_err(|_| bad())?)
            }
            ["rbf", g] => Self::rbf(g.parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |acc, (a, b)| acc + a * b)
}

/// `κ(x, y)`.
pub fn kernel_entry(x: &[f64], y: &[f64], spec: &KernelSpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(spec.from_parts(dot(x, y), dot(x, x), dot(y, y)))
}

/// `p × n` data, one sample per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    x: Matrix,
    sq_norms: Vec<f64>,
}

impl DataMatrix {
    pub fn new(x: Matrix) -> Result<Self> {
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry in sample {}",
                pos / x.nrows().max(1)
            )));
        }
        let sq_norms = x
            .column_iter()
            .map(|c| dot(c.as_slice(), c.as_slice()))
            .collect();
        Ok(Self { x, sq_norms })
    }

    /// Builds from per-sample feature vectors.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let p = samples.first().map_or(0, Vec::len);
        if let Some(bad) = samples.iter().find(|s| s.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: bad.len(),
            });
        }
        Self::new(Matrix::from_iterator(
            p,
            samples.len(),
            samples.iter().flatten().cloned(),
        ))
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn p(&self) -> usize {
        self.x.nrows()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.x.as_slice()[i * p..(i + 1) * p]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn into_matrix(self) -> Matrix {
        self.x
    }
}

/// Columns `start..start + width` of a kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnBlock {
    pub start: usize,
    /// `n × width`; entry `(i, j)` is `κ(x_i, x_{start + j})`.
    pub entries: Matrix,
}

impl ColumnBlock {
    pub fn width(&self) -> usize {
        self.entries.ncols()
    }
}

/// Anything that can produce columns of a symmetric PSD kernel matrix.
pub trait ColumnSource: Sync {
    /// Order `n` of the (square) kernel matrix.
    fn n(&self) -> usize;

    /// Writes column `j` (length `n`) into `out[..n]`.
    fn fill_column(&self, j: usize, out: &mut [f64]);
}

/// Writes columns `start..start + width` into `out`, column-major with
/// leading dimension `ld >= n`; rows `n..ld` are left untouched. Columns are
/// generated in parallel.
pub fn fill_block<S: ColumnSource + ?Sized>(
    source: &S,
    start: usize,
    width: usize,
    out: &mut [f64],
    ld: usize,
) -> Result<()> {
    let n = source.n();
    let end = start.checked_add(width).unwrap_or(usize::MAX);
    if end > n {
        return Err(Error::BlockOutOfRange { start, end, n });
    }
    if ld < n || out.len() < ld * width {
        return Err(Error::InvalidArgument(format!(
            "block buffer of {} entries too small for {width} columns of stride {ld}",
            out.len()
        )));
    }
    if width == 0 {
        return Ok(());
    }
    out[..ld * width]
        .par_chunks_mut(ld)
        .enumerate()
        .for_each(|(j, col)| source.fill_column(start + j, &mut col[..n]));
    Ok(())
}

/// Generates an `n × width` [`ColumnBlock`] from any source.
pub fn column_block<S: ColumnSource + ?Sized>(
    source: &S,
    start: usize,
    width: usize,
) -> Result<ColumnBlock> {
    let n = source.n();
    let mut entries = Matrix::zeros(n, width);
    fill_block(source, start, width, entries.as_mut_slice(), n)?;
    Ok(ColumnBlock { start, entries })
}

/// Forms the full kernel matrix; refuses when `n > cap`.
pub fn materialize<S: ColumnSource + ?Sized>(source: &S, cap: usize) -> Result<Matrix> {
    let n = source.n();
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    Ok(column_block(source, 0, n)?.entries)
}

/// Kernel columns computed on the fly from data.
#[derive(Debug, Clone, Copy)]
pub struct KernelColumns<'a> {
    data: &'a DataMatrix,
    spec: KernelSpec,
}

impl<'a> KernelColumns<'a> {
    pub fn new(data: &'a DataMatrix, spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { data, spec })
    }

    pub fn data(&self) -> &DataMatrix {
        self.data
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }
}

impl ColumnSource for KernelColumns<'_> {
    fn n(&self) -> usize {
        self.data.n()
    }

    fn fill_column(&self, j: usize, out: &mut [f64]) {
        let xj = self.data.sample(j);
        let sq_j = self.data.sq_norms[j];
        for (i, o) in out[..self.n()].iter_mut().enumerate() {
            let xi = self.data.sample(i);
            *o = self
                .spec
                .from_parts(dot(xi, xj), self.data.sq_norms[i], sq_j);
        }
    }
}

/// `κ(x_i, x_{start + j})` for `j < width`.
pub fn kernel_column_block(
    data: &DataMatrix,
    start: usize,
    width: usize,
    spec: &KernelSpec,
) -> Result<ColumnBlock> {
    column_block(&KernelColumns::new(data, *spec)?, start, width)
}

/// A precomputed symmetric kernel matrix served as columns.
#[derive(Debug, Clone)]
pub struct DenseKernel(Matrix);

impl DenseKernel {
    /// Accepts a square matrix symmetric to within `1e-12` relative.
    pub fn new(k: Matrix) -> Result<Self> {
        if !k.is_square() {
            return Err(Error::InvalidArgument(
                "kernel matrix must be square".into(),
            ));
        }
        let asym = (&k - k.transpose()).norm();
        if asym > 1e-12 * k.norm() {
            return Err(Error::InvalidArgument(format!(
                "kernel matrix is not symmetric (‖K − Kᵀ‖_F = {asym:.3e})"
            )));
        }
        Ok(Self(k))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

impl ColumnSource for DenseKernel {
    fn n(&self) -> usize {
        self.0.nrows()
    }

    fn fill_column(&self, j: usize, out: &mut [f64]) {
        out[..self.n()].copy_from_slice(self.0.column(j).as_slice());
    }
}

/// Wraps a source and counts how often each column is generated.
#[derive(Debug)]
pub struct CountingSource<S> {
    inner: S,
    counts: Vec<AtomicUsize>,
}

impl<S: ColumnSource> CountingSource<S> {
    pub fn new(inner: S) -> Self {
        let counts = (0..inner.n()).map(|_| AtomicUsize::new(0)).collect();
        Self { inner, counts }
    }

    pub fn counts(&self) -> Vec<usize> {
        self.counts
            .iter()
            .map(|c| c.load(Ordering::Relaxed))
            .collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|c| c.load(Ordering::Relaxed)).sum()
    }

    pub fn reset(&self) {
        for c in &self.counts {
            c.store(0, Ordering::Relaxed);
        }
    }
}

impl<S: ColumnSource> ColumnSource for CountingSource<S> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn fill_column(&self, j: usize, out: &mut [f64]) {
        self.counts[j].fetch_add(1, Ordering::Relaxed);
        self.inner.fill_column(j, out);
    }
}
