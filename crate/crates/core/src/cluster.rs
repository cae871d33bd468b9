//! K-means on embedded points, full kernel K-means, and objective evaluation.
//!
//! Both Lloyd variants share one driver: greedy k-means++ seeding, then alternating
//! nearest-center assignment and center update. The Euclidean variant keeps
//! explicit means; the kernel variant evaluates distances to implicit
//! feature-space means through the kernel matrix,
//! `‖φ(x_i) − μ_c‖² = K_ii − 2/|S_c| Σ_{l∈S_c} K_il + 1/|S_c|² Σ_{l,l'∈S_c} K_ll'`.
//!
//! Ties in nearest-center assignment go to the lowest cluster index. A cluster
//! that empties is reseeded with the point farthest from its assigned center.

use rand::Rng;
use rayon::prelude::*;

use crate::kernel::{self, ColumnSource, DEFAULT_DENSE_CAP};
use crate::{rng, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub clusters: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl KMeansConfig {
    /// Ten restarts of at most twenty iterations each.
    pub fn new(clusters: usize) -> Self {
        Self {
            clusters,
            restarts: 10,
            max_iter: 20,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.clusters == 0 || self.clusters > n {
            return Err(Error::InvalidArgument(format!(
                "cluster count must be in [1, {n}], got {}",
                self.clusters
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Hard clustering with every cluster non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    clusters: usize,
    objective: f64,
    iterations: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, clusters: usize, objective: f64) -> Result<Self> {
        check_labels(&labels, clusters)?;
        Ok(Self {
            labels,
            clusters,
            objective,
            iterations: 0,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    /// Sum of squared distances to the assigned cluster means.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Lloyd iterations run by the winning restart.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn indicator(&self) -> IndicatorMatrix {
        IndicatorMatrix::from_labels(&self.labels, self.clusters)
            .expect("assignments are validated on construction")
    }
}

fn check_labels(labels: &[usize], clusters: usize) -> Result<()> {
    let mut sizes = vec![0usize; clusters];
    for &l in labels {
        if l >= clusters {
            return Err(Error::InvalidArgument(format!(
                "label {l} out of range for {clusters} clusters"
            )));
        }
        sizes[l] += 1;
    }
    match sizes.iter().position(|&s| s == 0) {
        Some(empty) => Err(Error::EmptyCluster(empty)),
        None => Ok(()),
    }
}

/// Normalized cluster indicator `C` (`K × n`): `C[label_j, j] = 1/√|S_label_j|`.
///
/// Its rows are orthonormal, so `CᵀC` is an orthogonal projection.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMatrix {
    c: Matrix,
}

impl IndicatorMatrix {
    pub fn from_labels(labels: &[usize], clusters: usize) -> Result<Self> {
        check_labels(labels, clusters)?;
        let mut sizes = vec![0usize; clusters];
        for &l in labels {
            sizes[l] += 1;
        }
        let mut c = Matrix::zeros(clusters, labels.len());
        for (j, &l) in labels.iter().enumerate() {
            c[(l, j)] = 1.0 / (sizes[l] as f64).sqrt();
        }
        Ok(Self { c })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.c
    }

    /// `CᵀC`.
    pub fn projection(&self) -> Matrix {
        self.c.tr_mul(&self.c)
    }

    /// `I − CᵀC`.
    pub fn complement(&self) -> Matrix {
        let n = self.c.ncols();
        Matrix::identity(n, n) - self.projection()
    }
}

/// `trace((I − CᵀC)·K·(I − CᵀC))` for the indicator of `labels`.
pub fn trace_objective(k: &Matrix, labels: &[usize], clusters: usize) -> Result<f64> {
    if k.nrows() != labels.len() || !k.is_square() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            actual: labels.len(),
        });
    }
    let a = IndicatorMatrix::from_labels(labels, clusters)?.complement();
    Ok((&a * k * &a).trace())
}

/// Kernel K-means objective as a sum of feature-space squared distances to
/// the cluster means.
pub fn kernel_objective(k: &Matrix, labels: &[usize], clusters: usize) -> Result<f64> {
    if k.nrows() != labels.len() || !k.is_square() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            actual: labels.len(),
        });
    }
    check_labels(labels, clusters)?;
    Ok(KernelSpace { k }.objective(labels, clusters))
}

/// Euclidean K-means objective of the columns of `y`.
pub fn kmeans_objective(y: &Matrix, labels: &[usize], clusters: usize) -> Result<f64> {
    if y.ncols() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: y.ncols(),
            actual: labels.len(),
        });
    }
    check_labels(labels, clusters)?;
    Ok(EuclideanSpace { y }.objective(labels, clusters))
}

/// Where the current centers come from.
#[derive(Clone, Copy)]
enum Centers<'a> {
    /// Center `c` is data point `seeds[c]`.
    Points(&'a [usize]),
    /// Center `c` is the mean of the points labeled `c`.
    Means(&'a [usize]),
}

trait Space: Sync {
    fn n(&self) -> usize;
    /// Squared distance between points `i` and `j`.
    fn point_distance(&self, i: usize, j: usize) -> f64;
    /// `n × k` squared distances from every point to every center.
    fn distances(&self, centers: Centers<'_>, k: usize) -> Matrix;
    fn objective(&self, labels: &[usize], k: usize) -> f64;
}

struct EuclideanSpace<'a> {
    y: &'a Matrix,
}

impl EuclideanSpace<'_> {
    fn means(&self, labels: &[usize], k: usize) -> Matrix {
        let mut means = Matrix::zeros(self.y.nrows(), k);
        let mut sizes = vec![0usize; k];
        for (j, &l) in labels.iter().enumerate() {
            sizes[l] += 1;
            let mut col = means.column_mut(l);
            col += self.y.column(j);
        }
        for (c, &s) in sizes.iter().enumerate() {
            if s > 0 {
                let mut col = means.column_mut(c);
                col /= s as f64;
            }
        }
        means
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (x, y)| acc + (x - y) * (x - y))
}

impl Space for EuclideanSpace<'_> {
    fn n(&self) -> usize {
        self.y.ncols()
    }

    fn point_distance(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.y.column(i).as_slice(), self.y.column(j).as_slice())
    }

    fn distances(&self, centers: Centers<'_>, k: usize) -> Matrix {
        let centroids = match centers {
            Centers::Points(seeds) => {
                Matrix::from_fn(self.y.nrows(), k, |r, c| self.y[(r, seeds[c])])
            }
            Centers::Means(labels) => self.means(labels, k),
        };
        let n = self.n();
        let mut rows = vec![0.0; n * k];
        rows.par_chunks_mut(k).enumerate().for_each(|(i, row)| {
            let yi = self.y.column(i);
            for (c, d) in row.iter_mut().enumerate() {
                *d = sq_dist(yi.as_slice(), centroids.column(c).as_slice());
            }
        });
        Matrix::from_row_slice(n, k, &rows)
    }

    fn objective(&self, labels: &[usize], k: usize) -> f64 {
        let means = self.means(labels, k);
        labels.iter().enumerate().fold(0.0, |acc, (i, &l)| {
            acc + sq_dist(self.y.column(i).as_slice(), means.column(l).as_slice())
        })
    }
}

struct KernelSpace<'a> {
    k: &'a Matrix,
}

impl KernelSpace<'_> {
    /// Per-cluster size and `Σ_{l,l'∈S_c} K_ll'`.
    fn cluster_terms(&self, labels: &[usize], k: usize) -> (Vec<usize>, Vec<f64>) {
        let mut sizes = vec![0usize; k];
        for &l in labels {
            sizes[l] += 1;
        }
        let mut inner = vec![0.0; k];
        for (j, &lj) in labels.iter().enumerate() {
            let col = self.k.column(j);
            for (i, &li) in labels.iter().enumerate() {
                if li == lj {
                    inner[lj] += col[i];
                }
            }
        }
        (sizes, inner)
    }

    /// `n × k` matrix of `Σ_{l∈S_c} K_il`.
    fn cross_terms(&self, labels: &[usize], k: usize) -> Matrix {
        let n = self.n();
        let mut rows = vec![0.0; n * k];
        rows.par_chunks_mut(k).enumerate().for_each(|(i, row)| {
            for (l, &c) in labels.iter().enumerate() {
                row[c] += self.k[(i, l)];
            }
        });
        Matrix::from_row_slice(n, k, &rows)
    }
}

impl Space for KernelSpace<'_> {
    fn n(&self) -> usize {
        self.k.nrows()
    }

    fn point_distance(&self, i: usize, j: usize) -> f64 {
        (self.k[(i, i)] + self.k[(j, j)] - 2.0 * self.k[(i, j)]).max(0.0)
    }

    fn distances(&self, centers: Centers<'_>, k: usize) -> Matrix {
        let n = self.n();
        match centers {
            Centers::Points(seeds) => Matrix::from_fn(n, k, |i, c| {
                let s = seeds[c];
                self.k[(i, i)] - 2.0 * self.k[(i, s)] + self.k[(s, s)]
            }),
            Centers::Means(labels) => {
                let (sizes, inner) = self.cluster_terms(labels, k);
                let cross = self.cross_terms(labels, k);
                Matrix::from_fn(n, k, |i, c| {
                    if sizes[c] == 0 {
                        return f64::INFINITY;
                    }
                    let s = sizes[c] as f64;
                    self.k[(i, i)] - 2.0 * cross[(i, c)] / s + inner[c] / (s * s)
                })
            }
        }
    }

    fn objective(&self, labels: &[usize], k: usize) -> f64 {
        let (sizes, inner) = self.cluster_terms(labels, k);
        let cross = self.cross_terms(labels, k);
        labels.iter().enumerate().fold(0.0, |acc, (i, &c)| {
            let s = sizes[c] as f64;
            acc + self.k[(i, i)] - 2.0 * cross[(i, c)] / s + inner[c] / (s * s)
        })
    }
}

/// One Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub objective: f64,
    /// Objective after each update, first entry from the seeding assignment.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn assign(d: &Matrix) -> (Vec<usize>, Vec<f64>) {
    d.row_iter()
        .map(|row| {
            let mut best = (0, row[0]);
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v < best.1 {
                    best = (c, v);
                }
            }
            best
        })
        .unzip()
}

/// Moves the point farthest from its assigned center into each empty cluster.
fn repair_empty(labels: &mut [usize], dist: &mut [f64], k: usize) {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let mut far: Option<(usize, f64)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] >= 2 && far.is_none_or(|(_, d)| dist[i] > d) {
                far = Some((i, dist[i]));
            }
        }
        let Some((p, _)) = far else { break };
        sizes[labels[p]] -= 1;
        sizes[empty] += 1;
        labels[p] = empty;
        dist[p] = 0.0;
    }
}

fn lloyd<S: Space>(space: &S, k: usize, seeds: &[usize], max_iter: usize) -> LloydRun {
    let (mut labels, mut dist) = assign(&space.distances(Centers::Points(seeds), k));
    let mut history = Vec::with_capacity(max_iter + 1);
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_iter {
        repair_empty(&mut labels, &mut dist, k);
        history.push(space.objective(&labels, k));
        iterations += 1;
        let (next, next_dist) = assign(&space.distances(Centers::Means(&labels), k));
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
        dist = next_dist;
    }
    if !converged {
        repair_empty(&mut labels, &mut dist, k);
        history.push(space.objective(&labels, k));
    }
    LloydRun {
        objective: *history.last().expect("at least one objective"),
        labels,
        history,
        iterations,
        converged,
    }
}

/// Greedy k-means++ seeding: each step draws `2 + ⌊ln k⌋` candidates with
/// probability proportional to squared distance from the nearest seed so far
/// and keeps the one that most reduces the total squared distance.
fn plus_plus<S: Space, R: Rng>(space: &S, k: usize, rng: &mut R) -> Vec<usize> {
    let n = space.n();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let first = rng.random_range(0..n);
    let mut seeds = vec![first];
    let mut d2: Vec<f64> = (0..n).map(|i| space.point_distance(i, first)).collect();
    while seeds.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            let free: Vec<usize> = (0..n).filter(|i| !seeds.contains(i)).collect();
            let next = free[rng.random_range(0..free.len())];
            seeds.push(next);
            for (i, d) in d2.iter_mut().enumerate() {
                *d = d.min(space.point_distance(i, next));
            }
            continue;
        }
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = sample_weighted(&d2, rng.random::<f64>() * total);
            let nd: Vec<f64> = d2
                .iter()
                .enumerate()
                .map(|(i, &d)| d.min(space.point_distance(i, cand)))
                .collect();
            let pot: f64 = nd.iter().sum();
            if best.as_ref().is_none_or(|(b, _, _)| pot < *b) {
                best = Some((pot, cand, nd));
            }
        }
        let (_, next, nd) = best.expect("trials >= 2");
        seeds.push(next);
        d2 = nd;
    }
    seeds
}

/// Index whose cumulative positive weight first exceeds `target`.
fn sample_weighted(w: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut pick = None;
    for (i, &d) in w.iter().enumerate() {
        if d <= 0.0 {
            continue;
        }
        acc += d;
        pick = Some(i);
        if acc > target {
            break;
        }
    }
    pick.expect("positive total has a positive entry")
}

fn best_of_restarts<S: Space>(space: &S, cfg: &KMeansConfig) -> ClusterAssignment {
    let runs: Vec<LloydRun> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(cfg.seed, rng::STREAM_KMEANS_BASE + r as u64);
            let seeds = plus_plus(space, cfg.clusters, &mut rng);
            lloyd(space, cfg.clusters, &seeds, cfg.max_iter)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| {
            if run.objective < best.objective {
                run
            } else {
                best
            }
        })
        .expect("restarts >= 1");
    ClusterAssignment {
        labels: best.labels,
        clusters: cfg.clusters,
        objective: best.objective,
        iterations: best.iterations,
    }
}

/// Best-of-restarts Lloyd's algorithm on the columns of `y` (`r × n`).
pub fn kmeans(y: &Matrix, cfg: &KMeansConfig) -> Result<ClusterAssignment> {
    cfg.validate(y.ncols())?;
    Ok(best_of_restarts(&EuclideanSpace { y }, cfg))
}

/// Single Lloyd run on the columns of `y` from the given seed points.
pub fn lloyd_euclidean(y: &Matrix, seeds: &[usize], max_iter: usize) -> Result<LloydRun> {
    check_seeds(seeds, y.ncols())?;
    Ok(lloyd(&EuclideanSpace { y }, seeds.len(), seeds, max_iter))
}

/// Single kernel K-means run on the dense kernel `k` from the given seed points.
pub fn lloyd_kernel(k: &Matrix, seeds: &[usize], max_iter: usize) -> Result<LloydRun> {
    if !k.is_square() {
        return Err(Error::InvalidArgument(
            "kernel matrix must be square".into(),
        ));
    }
    check_seeds(seeds, k.nrows())?;
    Ok(lloyd(&KernelSpace { k }, seeds.len(), seeds, max_iter))
}

fn check_seeds(seeds: &[usize], n: usize) -> Result<()> {
    if seeds.is_empty() || seeds.len() > n || seeds.iter().any(|&s| s >= n) {
        return Err(Error::InvalidArgument(format!(
            "need 1..={n} seed indices below {n}, got {seeds:?}"
        )));
    }
    Ok(())
}

/// Kernel K-means on a dense kernel matrix.
pub fn kernel_kmeans_dense(k: &Matrix, cfg: &KMeansConfig) -> Result<ClusterAssignment> {
    if !k.is_square() {
        return Err(Error::InvalidArgument(
            "kernel matrix must be square".into(),
        ));
    }
    cfg.validate(k.nrows())?;
    Ok(best_of_restarts(&KernelSpace { k }, cfg))
}

/// Full iterative kernel K-means; materializes `K`, so `n ≤ cap`.
pub fn kernel_kmeans_full<S: ColumnSource + ?Sized>(
    source: &S,
    cfg: &KMeansConfig,
    cap: usize,
) -> Result<ClusterAssignment> {
    cfg.validate(source.n())?;
    let k = kernel::materialize(source, cap)?;
    kernel_kmeans_dense(&k, cfg)
}

/// [`kernel_kmeans_full`] with the default dense cap.
pub fn kernel_kmeans<S: ColumnSource + ?Sized>(
    source: &S,
    cfg: &KMeansConfig,
) -> Result<ClusterAssignment> {
    kernel_kmeans_full(source, cfg, DEFAULT_DENSE_CAP)
}

pub const BRUTE_FORCE_MAX_N: usize = 12;
pub const BRUTE_FORCE_MAX_CLUSTERS: usize = 3;

/// Calls `f` with every labeling of `n` points into exactly `k` non-empty
/// clusters, each partition once (labels in first-appearance order).
pub fn for_each_partition(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    fn rec(
        pos: usize,
        used: usize,
        n: usize,
        k: usize,
        labels: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if pos == n {
            if used == k {
                f(labels);
            }
            return;
        }
        // Not enough points left to open the remaining clusters.
        if k - used > n - pos {
            return;
        }
        for l in 0..(used + 1).min(k) {
            labels.push(l);
            rec(pos + 1, used.max(l + 1), n, k, labels, f);
            labels.pop();
        }
    }
    if k == 0 || k > n {
        return;
    }
    let mut labels = Vec::with_capacity(n);
    rec(0, 0, n, k, &mut labels, &mut f);
}

/// Exact minimizer of the trace objective over all partitions into
/// `clusters` groups (`n ≤ 12`, `clusters ≤ 3`).
pub fn brute_force_optimal(k: &Matrix, clusters: usize) -> Result<ClusterAssignment> {
    let n = k.nrows();
    if !k.is_square() {
        return Err(Error::InvalidArgument(
            "kernel matrix must be square".into(),
        ));
    }
    if n > BRUTE_FORCE_MAX_N || clusters > BRUTE_FORCE_MAX_CLUSTERS {
        return Err(Error::EnumerationBound(format!(
            "n = {n} (max {BRUTE_FORCE_MAX_N}), clusters = {clusters} (max {BRUTE_FORCE_MAX_CLUSTERS})"
        )));
    }
    if clusters == 0 || clusters > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count must be in [1, {n}], got {clusters}"
        )));
    }
    // L(C) = trace(K) − Σ_c (Σ_{i,j∈S_c} K_ij) / |S_c|
    let trace = k.trace();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut sums = vec![0.0; clusters];
    let mut sizes = vec![0usize; clusters];
    for_each_partition(n, clusters, |labels| {
        sums.iter_mut().for_each(|s| *s = 0.0);
        sizes.iter_mut().for_each(|s| *s = 0);
        for (j, &lj) in labels.iter().enumerate() {
            sizes[lj] += 1;
            for (i, &li) in labels.iter().enumerate() {
                if li == lj {
                    sums[lj] += k[(i, j)];
                }
            }
        }
        let value = trace
            - sums
                .iter()
                .zip(&sizes)
                .map(|(s, &c)| s / c as f64)
                .sum::<f64>();
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, labels.to_vec()));
        }
    });
    let (objective, labels) = best.expect("at least one partition exists");
    ClusterAssignment::new(labels, clusters, objective)
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

    /// Exhaustive search over all k^n labelings, keeping surjective ones.
    fn exhaustive_min(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> f64) -> f64 {
        let mut best = f64::INFINITY;
        let mut labels = vec![0usize; n];
        for code in 0..k.pow(n as u32) {
            let mut c = code;
            for l in labels.iter_mut() {
                *l = c % k;
                c /= k;
            }
            if (0..k).all(|j| labels.contains(&j)) {
                best = best.min(f(&labels));
            }
        }
        best
    }

    #[test]
    fn two_points_two_clusters() {
        let y = Matrix::from_column_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let a = kmeans(&y, &KMeansConfig::new(2)).unwrap();
        assert_eq!(a.objective(), 0.0);
        assert_ne!(a.labels()[0], a.labels()[1]);
    }

    #[test]
    fn kmeans_reaches_exhaustive_optimum() {
        let y = randn(2, 8, 3);
        let a = kmeans(&y, &KMeansConfig::new(2).with_restarts(50)).unwrap();
        let best = exhaustive_min(8, 2, |l| kmeans_objective(&y, l, 2).unwrap());
        assert!((a.objective() - best).abs() < 1e-10 * best.max(1.0));
    }

    #[test]
    fn objective_matches_recomputation() {
        let y = randn(3, 60, 4);
        let a = kmeans(&y, &KMeansConfig::new(4).with_seed(9)).unwrap();
        let recomputed = kmeans_objective(&y, a.labels(), 4).unwrap();
        assert!((a.objective() - recomputed).abs() <= 1e-8 * recomputed);
        // And equals the trace form on the linear kernel.
        let k = y.tr_mul(&y);
        let t = trace_objective(&k, a.labels(), 4).unwrap();
        assert!((t - recomputed).abs() <= 1e-8 * recomputed);
    }

    #[test]
    fn lloyd_objective_is_monotone() {
        let y = randn(2, 200, 5);
        for seeds in [[0usize, 1, 2, 3, 4], [10, 11, 12, 13, 14]] {
            let run = lloyd_euclidean(&y, &seeds, 50).unwrap();
            assert!(
                run.history.windows(2).all(|w| w[1] <= w[0] + 1e-10),
                "{:?}",
                run.history
            );
        }
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // Duplicate seeds leave cluster 1 empty after the first assignment.
        let y = Matrix::from_column_slice(1, 5, &[0.0, 0.0, 1.0, 5.0, 6.0]);
        let run = lloyd_euclidean(&y, &[0, 1], 20).unwrap();
        assert!(run.labels.contains(&0) && run.labels.contains(&1));
        assert!(check_labels(&run.labels, 2).is_ok());
        assert!(run.history.windows(2).all(|w| w[1] <= w[0] + 1e-10));

        let k = y.tr_mul(&y);
        let krun = lloyd_kernel(&k, &[0, 1], 20).unwrap();
        assert!(check_labels(&krun.labels, 2).is_ok());
    }

    #[test]
    fn identical_points_still_get_nonempty_clusters() {
        let y = Matrix::from_element(2, 6, 1.5);
        let a = kmeans(&y, &KMeansConfig::new(3)).unwrap();
        assert!(check_labels(a.labels(), 3).is_ok());
        assert_eq!(a.objective(), 0.0);
    }

    #[test]
    fn stops_after_max_iter() {
        let y = randn(2, 300, 6);
        let run = lloyd_euclidean(&y, &[0, 1, 2, 3, 4, 5, 6, 7], 2).unwrap();
        assert!(run.iterations <= 2);
        let run = lloyd_euclidean(&y, &[0, 1], 0).unwrap();
        assert_eq!(run.iterations, 0);
        assert_eq!(run.history.len(), 1);
    }

    #[test]
    fn linear_kernel_reduces_to_kmeans() {
        let x = randn(3, 40, 7);
        let k = x.tr_mul(&x);
        let seeds = [3, 17, 29];
        let euclid = lloyd_euclidean(&x, &seeds, 20).unwrap();
        let kernel = lloyd_kernel(&k, &seeds, 20).unwrap();
        assert_eq!(euclid.labels, kernel.labels);
        assert!((euclid.objective - kernel.objective).abs() < 1e-9 * euclid.objective);
    }

    #[test]
    fn kernel_distances_match_cholesky_embedding() {
        let x = randn(2, 10, 8);
        let data = crate::kernel::DataMatrix::new(x).unwrap();
        let src =
            crate::kernel::KernelColumns::new(&data, crate::KernelSpec::rbf(0.5).unwrap()).unwrap();
        let k = kernel::materialize(&src, 100).unwrap();
        // K = L·Lᵀ; row i of L is an explicit feature vector of sample i.
        let l = k
            .clone()
            .cholesky()
            .expect("rbf kernel on distinct points is PD")
            .l();
        let emb = l.transpose();
        let labels = [0, 1, 2, 0, 1, 2, 0, 0, 1, 2];
        let explicit = EuclideanSpace { y: &emb }.distances(Centers::Means(&labels), 3);
        let implicit = KernelSpace { k: &k }.distances(Centers::Means(&labels), 3);
        assert!((explicit - implicit).abs().max() < 1e-8);
    }

    #[test]
    fn kernel_kmeans_objective_consistent() {
        let x = randn(2, 30, 9);
        let data = crate::kernel::DataMatrix::new(x).unwrap();
        let src = crate::kernel::KernelColumns::new(&data, crate::KernelSpec::default()).unwrap();
        let a = kernel_kmeans(&src, &KMeansConfig::new(3).with_seed(1)).unwrap();
        let k = kernel::materialize(&src, 100).unwrap();
        let t = trace_objective(&k, a.labels(), 3).unwrap();
        assert!((a.objective() - t).abs() <= 1e-8 * t.abs().max(1.0));
        assert!(kernel_kmeans_full(&src, &KMeansConfig::new(3), 10).is_err());
    }

    #[test]
    fn trace_objective_closed_forms() {
        let x = randn(3, 7, 10);
        let k = x.tr_mul(&x);
        let singletons: Vec<usize> = (0..7).collect();
        assert!(trace_objective(&k, &singletons, 7).unwrap().abs() < 1e-12);
        let one = vec![0; 7];
        let expected = k.trace() - k.sum() / 7.0;
        assert!((trace_objective(&k, &one, 1).unwrap() - expected).abs() < 1e-10);
        assert!(matches!(
            trace_objective(&k, &[0, 0, 0, 0, 0, 0, 2], 3),
            Err(Error::EmptyCluster(1))
        ));
    }

    #[test]
    fn trace_form_equals_sum_form() {
        for seed in 0..20 {
            let x = randn(3, 12, 100 + seed);
            let k = x.tr_mul(&x).map(|v| (v + 0.5) * (v + 0.5));
            let labels: Vec<usize> = (0..12).map(|i| (i * 7 + seed as usize) % 3).collect();
            let t = trace_objective(&k, &labels, 3).unwrap();
            let s = kernel_objective(&k, &labels, 3).unwrap();
            assert!((t - s).abs() <= 1e-8 * t.abs());
        }
    }

    #[test]
    fn indicator_properties() {
        let labels = [2, 0, 1, 1, 0, 2, 2, 1];
        let c = IndicatorMatrix::from_labels(&labels, 3).unwrap();
        let cct = c.matrix() * c.matrix().transpose();
        assert!((cct - Matrix::identity(3, 3)).abs().max() < 1e-15);
        let p = c.projection();
        assert!((&p * &p - &p).abs().max() < 1e-10);
        let a = c.complement();
        assert!((&a * &a - &a).abs().max() < 1e-10);
        assert!(IndicatorMatrix::from_labels(&[0, 0, 2], 3).is_err());
        assert!(IndicatorMatrix::from_labels(&[0, 3], 3).is_err());
    }

    #[test]
    fn partition_enumeration_counts() {
        // Stirling numbers of the second kind.
        for (n, k, expected) in [(4, 2, 7), (5, 3, 25), (8, 2, 127), (12, 3, 86_526)] {
            let mut count = 0;
            for_each_partition(n, k, |l| {
                assert_eq!(l.len(), n);
                count += 1;
            });
            assert_eq!(count, expected, "S({n}, {k})");
        }
    }

    #[test]
    fn brute_force_small_cases() {
        let k = Matrix::identity(2, 2);
        assert_eq!(brute_force_optimal(&k, 2).unwrap().objective(), 0.0);

        let pts = Matrix::from_column_slice(1, 4, &[0.0, 10.0, 0.1, 10.1]);
        let a = brute_force_optimal(&pts.tr_mul(&pts), 2).unwrap();
        let l = a.labels();
        assert_eq!(l[0], l[2]);
        assert_eq!(l[1], l[3]);
        assert_ne!(l[0], l[1]);
    }

    #[test]
    fn brute_force_is_optimal_over_all_labelings() {
        let x = randn(3, 8, 11);
        let k = x.tr_mul(&x).map(|v| v * v);
        let a = brute_force_optimal(&k, 2).unwrap();
        let best = exhaustive_min(8, 2, |l| trace_objective(&k, l, 2).unwrap());
        assert!(a.objective() <= best + 1e-9);
        assert!((a.objective() - trace_objective(&k, a.labels(), 2).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn brute_force_bounds() {
        assert!(matches!(
            brute_force_optimal(&Matrix::identity(13, 13), 2),
            Err(Error::EnumerationBound(_))
        ));
        assert!(matches!(
            brute_force_optimal(&Matrix::identity(6, 6), 4),
            Err(Error::EnumerationBound(_))
        ));
    }

    #[test]
    fn invalid_cluster_counts() {
        let y = randn(2, 3, 1);
        assert!(kmeans(&y, &KMeansConfig::new(4)).is_err());
        assert!(kmeans(&y, &KMeansConfig::new(0)).is_err());
        assert!(kmeans(&y, &KMeansConfig::new(2).with_restarts(0)).is_err());
    }

    #[test]
    fn kmeans_is_deterministic() {
        let y = randn(2, 500, 12);
        let cfg = KMeansConfig::new(5).with_seed(3);
        assert_eq!(kmeans(&y, &cfg).unwrap(), kmeans(&y, &cfg).unwrap());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn indicator_rows_orthonormal(labels in proptest::collection::vec(0usize..4, 4..20)) {
            let k = labels.iter().max().unwrap() + 1;
            let mut relabeled = labels.clone();
            // Compact to a surjective labeling.
            let mut seen: Vec<usize> = Vec::new();
            for l in relabeled.iter_mut() {
                let pos = seen.iter().position(|s| s == l).unwrap_or_else(|| { seen.push(*l); seen.len() - 1 });
                *l = pos;
            }
            let k = k.min(seen.len());
            let c = IndicatorMatrix::from_labels(&relabeled, k).unwrap();
            let cct = c.matrix() * c.matrix().transpose();
            proptest::prop_assert!((cct - Matrix::identity(k, k)).abs().max() < 1e-12);
        }
    }
}
