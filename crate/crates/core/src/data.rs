//! Synthetic rings, CSV ingestion and unit-norm normalization.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{rng, DataMatrix, Error, Matrix, Result};

/// Default ring radii and radial noise for the `rings` generator.
pub const DEFAULT_RING_RADII: [f64; 2] = [1.0, 2.0];
pub const DEFAULT_RING_NOISE: f64 = 0.1;

/// Samples with optional ground-truth classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    /// Dense class indices in `[0, classes)`, each class non-empty.
    pub truth: Option<Vec<usize>>,
    pub name: String,
}

impl LabeledDataset {
    pub fn new(
        data: DataMatrix,
        truth: Option<Vec<usize>>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if let Some(t) = &truth {
            if t.len() != data.n() {
                return Err(Error::DimensionMismatch {
                    expected: data.n(),
                    actual: t.len(),
                });
            }
            let k = t.iter().max().map_or(0, |&m| m + 1);
            let mut seen = vec![false; k];
            t.iter().for_each(|&l| seen[l] = true);
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(Error::EmptyCluster(missing));
            }
        }
        Ok(Self {
            data,
            truth,
            name: name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    /// Number of true classes, if labels are present.
    pub fn classes(&self) -> Option<usize> {
        self.truth
            .as_ref()
            .map(|t| t.iter().max().map_or(0, |&m| m + 1))
    }
}

/// Two concentric noisy rings in the plane; the first `n/2` samples form
/// ring 0 (radius `radii[0]`), the rest ring 1.
pub fn generate_rings(
    n: usize,
    radii: [f64; 2],
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "rings need a positive even n, got {n}"
        )));
    }
    let [r1, r2] = radii;
    if !(0.0 < r1 && r1 < r2 && r2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ring radii must satisfy 0 < r1 < r2, got [{r1}, {r2}]"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = rng::stream(seed, rng::STREAM_DATA);
    let mut x = Matrix::zeros(2, n);
    let mut truth = Vec::with_capacity(n);
    for j in 0..n {
        let ring = usize::from(j >= n / 2);
        let angle = rng.random::<f64>() * TAU;
        let noise: f64 = rng.sample(StandardNormal);
        let radius = radii[ring] + noise_sigma * noise;
        x[(0, j)] = radius * angle.cos();
        x[(1, j)] = radius * angle.sin();
        truth.push(ring);
    }
    LabeledDataset::new(DataMatrix::new(x)?, Some(truth), "rings")
}

/// Builds a named synthetic dataset (`rings`) with default parameters.
pub fn generate(name: &str, n: usize, seed: u64) -> Result<LabeledDataset> {
    match name {
        "rings" => generate_rings(n, DEFAULT_RING_RADII, DEFAULT_RING_NOISE, seed),
        other => Err(Error::InvalidArgument(format!(
            "unknown generator '{other}' (available: rings)"
        ))),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// Zero-based index of the class column, if any.
    pub label_column: Option<usize>,
    /// Leading lines dropped before parsing.
    pub skip_rows: usize,
}

/// Loads comma-separated samples, one per row. Blank rows are ignored.
/// Class labels may be arbitrary strings; they are numbered in order of
/// first appearance.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    // Byte offset of the first kept line.
    let body_start = text
        .match_indices('\n')
        .nth(opts.skip_rows.wrapping_sub(1))
        .map_or(
            if opts.skip_rows == 0 { 0 } else { text.len() },
            |(i, _)| i + 1,
        );
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text[body_start..].as_bytes());

    let mut samples: Vec<f64> = Vec::new();
    let mut arity: Option<usize> = None;
    let mut labels: Vec<usize> = Vec::new();
    let mut rows = 0;
    let mut classes: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = opts.skip_rows + record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let expected = *arity.get_or_insert(record.len());
        if record.len() != expected {
            return Err(parse_err(
                line,
                record.len().min(expected) + 1,
                format!("expected {expected} fields, found {}", record.len()),
            ));
        }
        if let Some(lc) = opts.label_column {
            if lc >= record.len() {
                return Err(parse_err(
                    line,
                    lc + 1,
                    format!("label column {lc} beyond the {} fields", record.len()),
                ));
            }
        }
        rows += 1;
        for (c, field) in record.iter().enumerate() {
            if Some(c) == opts.label_column {
                let next = classes.len();
                labels.push(*classes.entry(field.to_string()).or_insert(next));
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, c + 1, format!("not a number: '{field}'")))?;
            if !v.is_finite() {
                return Err(parse_err(
                    line,
                    c + 1,
                    format!("non-finite value '{field}'"),
                ));
            }
            samples.push(v);
        }
    }
    if rows == 0 {
        return Err(parse_err(opts.skip_rows + 1, 1, "no data rows".into()));
    }
    let p = samples.len() / rows;
    let data = DataMatrix::new(Matrix::from_vec(p, rows, samples))?;
    let name = path
        .file_stem()
        .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
    let truth = opts.label_column.map(|_| labels);
    LabeledDataset::new(data, truth, name)
}

/// Writes the dataset as CSV, label first when present. Values use Rust's
/// shortest round-trip formatting, so reloading is bit-exact.
pub fn write_csv(path: &Path, dataset: &LabeledDataset) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for j in 0..dataset.n() {
        let mut fields: Vec<String> = Vec::with_capacity(dataset.data.p() + 1);
        if let Some(t) = &dataset.truth {
            fields.push(t[j].to_string());
        }
        fields.extend(dataset.data.sample(j).iter().map(|v| v.to_string()));
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Scales every sample to unit ℓ2 norm. Zero samples are left unchanged;
/// their indices are returned and a warning is logged.
pub fn normalize_rows_unit_l2(data: &DataMatrix) -> Result<(DataMatrix, Vec<usize>)> {
    let mut x = data.matrix().clone();
    let mut zeros = Vec::new();
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            zeros.push(j);
        } else {
            col /= norm;
        }
    }
    if !zeros.is_empty() {
        warn!(
            "{} zero sample(s) left unnormalized, first at index {}",
            zeros.len(),
            zeros[0]
        );
    }
    Ok((DataMatrix::new(x)?, zeros))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_rings_lie_on_circles() {
        let d = generate_rings(100, [1.0, 2.0], 0.0, 3).unwrap();
        let truth = d.truth.as_ref().unwrap();
        for j in 0..100 {
            let s = d.data.sample(j);
            let norm = (s[0] * s[0] + s[1] * s[1]).sqrt();
            let expected = [1.0, 2.0][truth[j]];
            assert!((norm - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn rings_are_balanced_and_deterministic() {
        let a = generate_rings(40, DEFAULT_RING_RADII, 0.1, 5).unwrap();
        let b = generate_rings(40, DEFAULT_RING_RADII, 0.1, 5).unwrap();
        assert_eq!(a, b);
        let t = a.truth.unwrap();
        assert_eq!(t.iter().filter(|&&l| l == 0).count(), 20);
        assert_eq!(t.iter().filter(|&&l| l == 1).count(), 20);
        assert_ne!(
            generate_rings(40, DEFAULT_RING_RADII, 0.1, 6).unwrap().data,
            b.data
        );
    }

    #[test]
    fn rings_reject_bad_parameters() {
        assert!(generate_rings(41, [1.0, 2.0], 0.1, 0).is_err());
        assert!(generate_rings(40, [2.0, 1.0], 0.1, 0).is_err());
        assert!(generate_rings(40, [0.0, 1.0], 0.1, 0).is_err());
        assert!(generate_rings(40, [1.0, 2.0], -0.1, 0).is_err());
        assert!(generate("moons", 10, 0).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_fn(4, 25, |_, _| rng.sample::<f64, _>(StandardNormal) * 1e3);
        let truth: Vec<usize> = (0..25).map(|j| (j * 3 / 25).min(2)).collect();
        let ds = LabeledDataset::new(DataMatrix::new(x).unwrap(), Some(truth), "t").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&path, &ds).unwrap();
        let back = load_csv(
            &path,
            &CsvOptions {
                label_column: Some(0),
                skip_rows: 0,
            },
        )
        .unwrap();
        assert_eq!(back.data, ds.data);
        assert_eq!(back.truth, ds.truth);
    }

    #[test]
    fn single_row_without_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        std::fs::write(&path, "1.5, 2e-3 ,3\n").unwrap();
        let d = load_csv(&path, &CsvOptions::default()).unwrap();
        assert_eq!(d.n(), 1);
        assert_eq!(d.data.sample(0), &[1.5, 2e-3, 3.0]);
        assert!(d.truth.is_none());
    }

    #[test]
    fn string_labels_and_skipped_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seg.data");
        std::fs::write(
            &path,
            "Title\n\nA,B,C\n\nSKY,1,2\nGRASS,3,4\nSKY,5,6\n\nPATH,7,8\n",
        )
        .unwrap();
        let d = load_csv(
            &path,
            &CsvOptions {
                label_column: Some(0),
                skip_rows: 3,
            },
        )
        .unwrap();
        assert_eq!(d.n(), 4);
        assert_eq!(d.data.p(), 2);
        assert_eq!(d.truth.as_deref(), Some(&[0, 1, 0, 2][..]));
        assert_eq!(d.classes(), Some(3));
        assert_eq!(d.name, "seg");
    }

    #[test]
    fn parse_errors_carry_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "header\n1,2,3\n4,x,6\n").unwrap();
        match load_csv(
            &path,
            &CsvOptions {
                label_column: None,
                skip_rows: 1,
            },
        ) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 2)),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::write(&path, "1,2,3\n4,5\n").unwrap();
        match load_csv(&path, &CsvOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::write(&path, "").unwrap();
        assert!(load_csv(&path, &CsvOptions::default()).is_err());
        assert!(load_csv(&dir.path().join("missing.csv"), &CsvOptions::default()).is_err());
    }

    #[test]
    fn normalization() {
        let d = DataMatrix::from_samples(&[vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap();
        let (n, zeros) = normalize_rows_unit_l2(&d).unwrap();
        assert_eq!(n.sample(0), &[0.6, 0.8]);
        assert_eq!(n.sample(1), &[0.0, 0.0]);
        assert_eq!(zeros, vec![1]);
    }

    #[test]
    fn normalization_gives_unit_norms_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Matrix::from_fn(19, 50, |_, _| rng.sample::<f64, _>(StandardNormal) * 10.0);
        let (once, _) = normalize_rows_unit_l2(&DataMatrix::new(x).unwrap()).unwrap();
        for j in 0..50 {
            let norm: f64 = once.sample(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        let (twice, _) = normalize_rows_unit_l2(&once).unwrap();
        assert!((twice.matrix() - once.matrix()).abs().max() < 1e-15);
    }
}
