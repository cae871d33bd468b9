//! End-to-end runs: single clusterings, trial sweeps and the empirical
//! check of the approximation-error bound on clustering quality.
//!
//! The bound: if `Ĉ*` minimizes the K-means objective on `K̂ = YᵀY` and `C*`
//! minimizes it on `K`, then with `E = K − K̂`
//! `L(Ĉ*) − L(C*) ≤ 2‖E‖_*`, and `≤ trace(E)` when `K̂` is the best rank-`r`
//! truncation.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::approx::{self, Method, SketchConfig};
use crate::cluster::{self, KMeansConfig};
use crate::kernel::{self, DEFAULT_BLOCK_WIDTH, DEFAULT_DENSE_CAP};
use crate::metrics;
use crate::{rng, DataMatrix, Error, KernelColumns, KernelSpec, LabeledDataset, Matrix, Result};

/// Everything that can produce a clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PipelineMethod {
    OnePass,
    Gaussian,
    Nystrom,
    Exact,
    FullKkm,
    RawKmeans,
}

impl PipelineMethod {
    pub const ALL: [PipelineMethod; 6] = [
        PipelineMethod::OnePass,
        PipelineMethod::Gaussian,
        PipelineMethod::Nystrom,
        PipelineMethod::Exact,
        PipelineMethod::FullKkm,
        PipelineMethod::RawKmeans,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipelineMethod::OnePass => "one-pass",
            PipelineMethod::Gaussian => "gaussian",
            PipelineMethod::Nystrom => "nystrom",
            PipelineMethod::Exact => "exact",
            PipelineMethod::FullKkm => "full-kkm",
            PipelineMethod::RawKmeans => "raw-kmeans",
        }
    }

    /// True for the routes that linearize the kernel into `Y`.
    pub fn is_linearization(self) -> bool {
        matches!(
            self,
            PipelineMethod::OnePass
                | PipelineMethod::Gaussian
                | PipelineMethod::Nystrom
                | PipelineMethod::Exact
        )
    }
}

impl fmt::Display for PipelineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown method '{s}' (one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Parameters of one clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub method: PipelineMethod,
    pub kernel: KernelSpec,
    pub rank: usize,
    pub oversample: usize,
    /// Nyström column count `m`.
    pub samples: Option<usize>,
    /// Cluster count; defaults to the number of true classes.
    pub clusters: Option<usize>,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub block_width: usize,
    pub dense_cap: usize,
}

impl PipelineConfig {
    pub fn new(method: PipelineMethod, kernel: KernelSpec, rank: usize) -> Self {
        Self {
            method,
            kernel,
            rank,
            oversample: 10,
            samples: None,
            clusters: None,
            restarts: 10,
            max_iter: 20,
            seed: 0,
            block_width: DEFAULT_BLOCK_WIDTH,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    fn sketch_method(&self) -> Result<Method> {
        Ok(match self.method {
            PipelineMethod::OnePass => Method::OnePassSrht,
            PipelineMethod::Gaussian => Method::OnePassGaussian,
            PipelineMethod::Nystrom => Method::Nystrom {
                samples: self.samples.ok_or_else(|| {
                    Error::InvalidArgument("nystrom needs a sample count (--samples)".into())
                })?,
            },
            PipelineMethod::Exact => Method::Exact,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "{other} does not linearize the kernel"
                )))
            }
        })
    }

    fn sketch_config(&self) -> Result<SketchConfig> {
        let mut cfg = SketchConfig::new(self.sketch_method()?, self.rank)
            .with_oversample(self.oversample)
            .with_seed(self.seed)
            .with_block_width(self.block_width);
        cfg.dense_cap = self.dense_cap;
        Ok(cfg)
    }

    fn kmeans_config(&self, dataset: &LabeledDataset) -> Result<KMeansConfig> {
        let clusters = self.clusters.or(dataset.classes()).ok_or_else(|| {
            Error::InvalidArgument("cluster count required when the data has no labels".into())
        })?;
        Ok(KMeansConfig::new(clusters)
            .with_restarts(self.restarts)
            .with_max_iter(self.max_iter)
            .with_seed(self.seed))
    }
}

/// Result of one clustering run. Every key is always present; values that do
/// not apply to the method are null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub method: String,
    pub kernel: Option<String>,
    pub n: usize,
    pub clusters: usize,
    pub r: Option<usize>,
    pub l: Option<usize>,
    pub m: Option<usize>,
    pub seed: u64,
    pub approx_error: Option<f64>,
    pub accuracy: Option<f64>,
    /// K-means objective of the returned labels in the space clustered
    /// (embedding, kernel feature space, or raw features).
    pub objective: f64,
    pub wall_time_ms: f64,
    pub peak_block_memory_bytes: Option<usize>,
}

/// Runs linearize → K-means → metrics (or a non-linearized baseline).
pub fn run_cluster(
    dataset: &LabeledDataset,
    cfg: &PipelineConfig,
) -> Result<(ClusterReport, Vec<usize>)> {
    let start = Instant::now();
    let kcfg = cfg.kmeans_config(dataset)?;
    let n = dataset.n();
    let mut report = ClusterReport {
        method: cfg.method.to_string(),
        kernel: (cfg.method != PipelineMethod::RawKmeans).then(|| cfg.kernel.to_string()),
        n,
        clusters: kcfg.clusters,
        r: None,
        l: None,
        m: None,
        seed: cfg.seed,
        approx_error: None,
        accuracy: None,
        objective: 0.0,
        wall_time_ms: 0.0,
        peak_block_memory_bytes: None,
    };
    let assignment = match cfg.method {
        PipelineMethod::RawKmeans => cluster::kmeans(dataset.data.matrix(), &kcfg)?,
        PipelineMethod::FullKkm => {
            let source = KernelColumns::new(&dataset.data, cfg.kernel)?;
            report.peak_block_memory_bytes = Some(n * n * std::mem::size_of::<f64>());
            cluster::kernel_kmeans_full(&source, &kcfg, cfg.dense_cap)?
        }
        method => {
            let scfg = cfg.sketch_config()?;
            let source = KernelColumns::new(&dataset.data, cfg.kernel)?;
            let (factor, stats) = approx::linearize(&source, &scfg)?;
            report.r = Some(cfg.rank);
            match method {
                PipelineMethod::OnePass | PipelineMethod::Gaussian => {
                    report.l = Some(cfg.oversample)
                }
                PipelineMethod::Nystrom => report.m = cfg.samples,
                _ => {}
            }
            report.peak_block_memory_bytes = Some(stats.peak_bytes);
            report.approx_error = Some(approx::approx_error(&source, &factor, cfg.block_width)?);
            cluster::kmeans(factor.y(), &kcfg)?
        }
    };
    report.objective = assignment.objective();
    report.accuracy = dataset
        .truth
        .as_deref()
        .map(|t| metrics::clustering_accuracy(assignment.labels(), t))
        .transpose()?;
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((report, assignment.into_labels()))
}

/// A sweep over methods, Nyström sample counts and trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub methods: Vec<PipelineMethod>,
    /// Nyström sample counts `m`; one cell per value.
    pub samples: Vec<usize>,
    pub base: PipelineConfig,
    pub trials: usize,
}

/// One trial of one sweep cell. `samples` is `m` for Nyström, `r′ = r + l`
/// for the sketches, `r` for the exact route and empty otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub method: String,
    pub samples: Option<usize>,
    pub trial: usize,
    pub approx_error: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Mean of a sweep cell over its trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub method: String,
    pub samples: Option<usize>,
    pub trials: usize,
    pub mean_approx_error: Option<f64>,
    pub mean_accuracy: Option<f64>,
}

/// Runs every (method, m, trial) cell. Trial `t` uses seed
/// `derive_seed(base.seed, t)`. Linearizations that do not depend on the
/// seed (exact, full kernel) are computed once and shared by all trials.
/// Rows come back sorted by method, sample count and trial.
pub fn run_compare(dataset: &LabeledDataset, cfg: &CompareConfig) -> Result<Vec<CompareRow>> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods to compare".into()));
    }
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let mut cells: Vec<(PipelineMethod, Option<usize>)> = Vec::new();
    for &method in &methods {
        match method {
            PipelineMethod::Nystrom => {
                if cfg.samples.is_empty() {
                    return Err(Error::InvalidArgument(
                        "nystrom needs at least one --samples value".into(),
                    ));
                }
                let mut ms = cfg.samples.clone();
                ms.sort_unstable();
                ms.dedup();
                cells.extend(ms.into_iter().map(|m| (method, Some(m))));
            }
            PipelineMethod::OnePass | PipelineMethod::Gaussian => {
                cells.push((method, Some(cfg.base.rank + cfg.base.oversample)))
            }
            PipelineMethod::Exact => cells.push((method, Some(cfg.base.rank))),
            _ => cells.push((method, None)),
        }
    }

    let source = KernelColumns::new(&dataset.data, cfg.base.kernel)?;
    let kbase = cfg.base.kmeans_config(dataset)?;
    // Seed-independent inputs, built once.
    let exact = if methods.contains(&PipelineMethod::Exact) {
        let (factor, _) = approx::exact_truncated(&source, cfg.base.rank, cfg.base.dense_cap)?;
        let err = approx::approx_error(&source, &factor, cfg.base.block_width)?;
        Some((factor, err))
    } else {
        None
    };
    let dense = if methods.contains(&PipelineMethod::FullKkm) {
        Some(kernel::materialize(&source, cfg.base.dense_cap)?)
    } else {
        None
    };

    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let rows: Vec<CompareRow> = tasks
        .par_iter()
        .map(|&(c, trial)| -> Result<CompareRow> {
            let (method, samples) = cells[c];
            let seed = rng::derive_seed(cfg.base.seed, trial as u64);
            let kcfg = kbase.with_seed(seed);
            let (labels, approx_error) = match method {
                PipelineMethod::RawKmeans => (
                    cluster::kmeans(dataset.data.matrix(), &kcfg)?.into_labels(),
                    None,
                ),
                PipelineMethod::FullKkm => {
                    let k = dense.as_ref().expect("materialized above");
                    (cluster::kernel_kmeans_dense(k, &kcfg)?.into_labels(), None)
                }
                PipelineMethod::Exact => {
                    let (factor, err) = exact.as_ref().expect("computed above");
                    (
                        cluster::kmeans(factor.y(), &kcfg)?.into_labels(),
                        Some(*err),
                    )
                }
                _ => {
                    let mut p = cfg.base.clone();
                    p.method = method;
                    p.samples = samples.filter(|_| method == PipelineMethod::Nystrom);
                    p.seed = seed;
                    let (factor, _) = approx::linearize(&source, &p.sketch_config()?)?;
                    let err = approx::approx_error(&source, &factor, p.block_width)?;
                    (cluster::kmeans(factor.y(), &kcfg)?.into_labels(), Some(err))
                }
            };
            let accuracy = dataset
                .truth
                .as_deref()
                .map(|t| metrics::clustering_accuracy(&labels, t))
                .transpose()?;
            Ok(CompareRow {
                method: method.to_string(),
                samples,
                trial,
                approx_error,
                accuracy,
            })
        })
        .collect::<Result<_>>()?;
    // Tasks were generated in sorted cell order and collect preserves it.
    Ok(rows)
}

/// Per-cell means of `rows`, in first-appearance order.
pub fn summarize(rows: &[CompareRow]) -> Vec<CompareSummary> {
    let mut out: Vec<CompareSummary> = Vec::new();
    let mut sums: Vec<(f64, usize, f64, usize)> = Vec::new();
    for row in rows {
        let idx = match out
            .iter()
            .position(|s| s.method == row.method && s.samples == row.samples)
        {
            Some(i) => i,
            None => {
                out.push(CompareSummary {
                    method: row.method.clone(),
                    samples: row.samples,
                    trials: 0,
                    mean_approx_error: None,
                    mean_accuracy: None,
                });
                sums.push((0.0, 0, 0.0, 0));
                out.len() - 1
            }
        };
        out[idx].trials += 1;
        let s = &mut sums[idx];
        if let Some(e) = row.approx_error {
            s.0 += e;
            s.1 += 1;
        }
        if let Some(a) = row.accuracy {
            s.2 += a;
            s.3 += 1;
        }
    }
    for (summary, (e, ne, a, na)) in out.iter_mut().zip(sums) {
        summary.mean_approx_error = (ne > 0).then(|| e / ne as f64);
        summary.mean_accuracy = (na > 0).then(|| a / na as f64);
    }
    out
}

/// Random small instances for the bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheckConfig {
    pub trials: usize,
    pub n: usize,
    /// Feature dimension of the random samples.
    pub dim: usize,
    pub clusters: usize,
    pub method: PipelineMethod,
    pub rank: usize,
    pub oversample: usize,
    pub samples: Option<usize>,
    /// Fixed kernel; when absent, trials alternate between `poly:2:1` and `rbf:0.5`.
    pub kernel: Option<KernelSpec>,
    pub seed: u64,
}

impl BoundCheckConfig {
    pub fn new(method: PipelineMethod, n: usize, rank: usize) -> Self {
        Self {
            trials: 200,
            n,
            dim: 3,
            clusters: 2,
            method,
            rank,
            oversample: 2,
            samples: None,
            kernel: None,
            seed: 0,
        }
    }
}

/// Additive slack on both inequalities, absorbing rounding.
pub const BOUND_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTrial {
    pub trial: usize,
    pub kernel: String,
    /// `L(Ĉ*)`, the true objective of the partition optimal for `K̂`.
    pub l_hat: f64,
    /// `L(C*)`.
    pub l_star: f64,
    /// `2‖E‖_*`.
    pub twice_trace_norm: f64,
    /// `trace(E)`.
    pub trace_e: f64,
    pub trace_norm_bound_holds: bool,
    /// Only checked for the exact route.
    pub trace_bound_holds: Option<bool>,
}

impl BoundTrial {
    pub fn gap(&self) -> f64 {
        self.l_hat - self.l_star
    }

    pub fn passed(&self) -> bool {
        self.trace_norm_bound_holds && self.trace_bound_holds.unwrap_or(true)
    }
}

/// Checks the clustering-quality bound on random instances against the
/// brute-force optimal partitions of `K` and `K̂`.
pub fn run_bound_check(cfg: &BoundCheckConfig) -> Result<Vec<BoundTrial>> {
    if !cfg.method.is_linearization() {
        return Err(Error::InvalidArgument(format!(
            "bound check needs a linearization method, got {}",
            cfg.method
        )));
    }
    if cfg.n > cluster::BRUTE_FORCE_MAX_N || cfg.clusters > cluster::BRUTE_FORCE_MAX_CLUSTERS {
        return Err(Error::EnumerationBound(format!(
            "n = {} (max {}), clusters = {} (max {})",
            cfg.n,
            cluster::BRUTE_FORCE_MAX_N,
            cfg.clusters,
            cluster::BRUTE_FORCE_MAX_CLUSTERS
        )));
    }
    if cfg.dim == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    (0..cfg.trials)
        .into_par_iter()
        .map(|trial| bound_trial(cfg, trial))
        .collect()
}

fn bound_trial(cfg: &BoundCheckConfig, trial: usize) -> Result<BoundTrial> {
    let seed = rng::derive_seed(cfg.seed, trial as u64);
    let mut rng = rng::stream(seed, rng::STREAM_DATA);
    let x = Matrix::from_fn(cfg.dim, cfg.n, |_, _| rng.sample(StandardNormal));
    let data = DataMatrix::new(x)?;
    let spec = match cfg.kernel {
        Some(spec) => spec,
        None if trial % 2 == 0 => KernelSpec::polynomial(2, 1.0)?,
        None => KernelSpec::rbf(0.5)?,
    };
    let source = KernelColumns::new(&data, spec)?;
    let k = kernel::materialize(&source, cluster::BRUTE_FORCE_MAX_N)?;

    let mut p = PipelineConfig::new(cfg.method, spec, cfg.rank);
    p.oversample = cfg.oversample;
    p.samples = cfg.samples;
    p.seed = seed;
    p.dense_cap = cluster::BRUTE_FORCE_MAX_N;
    let (factor, _) = approx::linearize(&source, &p.sketch_config()?)?;
    let k_hat = factor.gram();

    let optimal = cluster::brute_force_optimal(&k, cfg.clusters)?;
    let optimal_hat = cluster::brute_force_optimal(&k_hat, cfg.clusters)?;
    let l_hat = cluster::trace_objective(&k, optimal_hat.labels(), cfg.clusters)?;
    let l_star = optimal.objective();
    let e = metrics::error_functionals(&k, &k_hat, cluster::BRUTE_FORCE_MAX_N)?;
    let gap = l_hat - l_star;
    Ok(BoundTrial {
        trial,
        kernel: spec.to_string(),
        l_hat,
        l_star,
        twice_trace_norm: 2.0 * e.trace_norm,
        trace_e: e.trace,
        trace_norm_bound_holds: gap <= 2.0 * e.trace_norm + BOUND_TOLERANCE,
        trace_bound_holds: (cfg.method == PipelineMethod::Exact)
            .then_some(gap <= e.trace + BOUND_TOLERANCE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;

    #[test]
    fn method_names_round_trip() {
        for m in PipelineMethod::ALL {
            assert_eq!(m.name().parse::<PipelineMethod>().unwrap(), m);
        }
        assert!("kmeans".parse::<PipelineMethod>().is_err());
    }

    #[test]
    fn report_keys_are_stable() {
        let ds = data::generate("rings", 40, 1).unwrap();
        let mut keys = None;
        for method in PipelineMethod::ALL {
            let mut cfg = PipelineConfig::new(method, KernelSpec::default(), 2);
            cfg.samples = Some(10);
            let (report, labels) = run_cluster(&ds, &cfg).unwrap();
            assert_eq!(labels.len(), 40);
            assert!(report.accuracy.is_some());
            let value = serde_json::to_value(&report).unwrap();
            let k: Vec<String> = value.as_object().unwrap().keys().cloned().collect();
            assert_eq!(keys.get_or_insert(k.clone()), &k);
        }
    }

    #[test]
    fn cluster_rejects_oversized_sketch() {
        let ds = data::generate("rings", 4, 1).unwrap();
        let cfg = PipelineConfig::new(PipelineMethod::OnePass, KernelSpec::default(), 4);
        assert!(matches!(
            run_cluster(&ds, &cfg),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn compare_row_counts_and_order() {
        let ds = data::generate("rings", 60, 2).unwrap();
        let mut base = PipelineConfig::new(PipelineMethod::OnePass, KernelSpec::default(), 2);
        base.oversample = 3;
        let cfg = CompareConfig {
            methods: vec![
                PipelineMethod::Nystrom,
                PipelineMethod::OnePass,
                PipelineMethod::Exact,
            ],
            samples: vec![10, 5],
            base,
            trials: 3,
        };
        let rows = run_compare(&ds, &cfg).unwrap();
        assert_eq!(rows.len(), 4 * 3);
        let keys: Vec<(String, Option<usize>, usize)> = rows
            .iter()
            .map(|r| (r.method.clone(), r.samples, r.trial))
            .collect();
        assert_eq!(keys[0], ("one-pass".into(), Some(5), 0));
        assert_eq!(keys[3], ("nystrom".into(), Some(5), 0));
        assert_eq!(keys[11], ("exact".into(), Some(2), 2));
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 4);
        assert!(summary.iter().all(|s| s.trials == 3));
        assert_eq!(run_compare(&ds, &cfg).unwrap(), rows);
    }

    #[test]
    fn single_trial_single_row() {
        let ds = data::generate("rings", 40, 3).unwrap();
        let cfg = CompareConfig {
            methods: vec![PipelineMethod::RawKmeans],
            samples: vec![],
            base: PipelineConfig::new(PipelineMethod::RawKmeans, KernelSpec::default(), 2),
            trials: 1,
        };
        let rows = run_compare(&ds, &cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].approx_error.is_none());
    }

    #[test]
    fn exact_full_rank_has_zero_gap() {
        let mut cfg = BoundCheckConfig::new(PipelineMethod::Exact, 8, 8);
        cfg.trials = 10;
        for t in run_bound_check(&cfg).unwrap() {
            assert!(t.gap().abs() < 1e-8, "{t:?}");
            assert!(t.twice_trace_norm < 1e-8);
            assert!(t.passed());
        }
    }

    #[test]
    fn bound_check_guards() {
        assert!(matches!(
            run_bound_check(&BoundCheckConfig::new(PipelineMethod::Exact, 13, 2)),
            Err(Error::EnumerationBound(_))
        ));
        assert!(run_bound_check(&BoundCheckConfig::new(PipelineMethod::FullKkm, 8, 2)).is_err());
    }
}
