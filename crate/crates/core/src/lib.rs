//! Memory-frugal kernel K-means.
//!
//! The kernel matrix is linearized as `K ≈ YᵀY` by a one-pass randomized
//! eigendecomposition that consumes kernel columns block by block and never
//! stores the full `n × n` matrix. Standard K-means on the columns of `Y`
//! then stands in for kernel K-means. Nyström and exact baselines, the full
//! kernel K-means iteration, and the metrics needed to compare them live
//! alongside.
//!
//! Modules, bottom-up:
//!
//! - [`linalg`]: fast Walsh–Hadamard transform, orthonormal bases, the small
//!   least-squares solve and symmetric eigendecomposition.
//! - [`kernel`]: kernel functions and streamed column generation.
//! - [`approx`]: the three linearization routes and their error.
//! - [`cluster`]: Lloyd's K-means, full kernel K-means, objectives and the
//!   brute-force optimal partition.
//! - [`metrics`]: clustering accuracy and error functionals.
//! - [`data`]: synthetic rings and CSV ingestion.
//! - [`experiment`]: end-to-end runs used by the command-line harness.

pub mod approx;
pub mod cluster;
pub mod data;
mod error;
pub mod experiment;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod rng;

pub use approx::{LowRankFactor, Method, SketchConfig, SketchStats};
pub use cluster::{ClusterAssignment, IndicatorMatrix, KMeansConfig};
pub use data::LabeledDataset;
pub use error::{Error, Result};
pub use kernel::{ColumnBlock, ColumnSource, DataMatrix, KernelColumns, KernelSpec};

/// Dense column-major `f64` matrix used throughout.
pub type Matrix = nalgebra::DMatrix<f64>;
