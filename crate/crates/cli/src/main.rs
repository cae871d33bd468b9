//! `kkm`: command-line harness for memory-frugal kernel K-means.
//!
//! Exit codes: 0 success, 1 invalid arguments, 2 data errors, 3 numerical
//! failure, 4 a violated bound in `bound-check`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kkm::data::{self, CsvOptions};
use kkm::experiment::{self, BoundCheckConfig, CompareConfig, PipelineConfig, PipelineMethod};
use kkm::{Error, KernelSpec, LabeledDataset};
use log::info;

#[derive(Parser)]
#[command(
    name = "kkm",
    version,
    about = "Memory-frugal kernel K-means experiments"
)]
struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster one dataset and write a JSON report.
    Cluster(ClusterArgs),
    /// Sweep methods and sample counts over trials; write CSV rows.
    Compare(CompareArgs),
    /// Check the clustering-quality bound on small random instances.
    BoundCheck(BoundArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Synthetic dataset, NAME:N (e.g. rings:4000).
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    generate: Option<String>,
    /// CSV file, one sample per row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Zero-based index of the class-label column in --data.
    #[arg(long)]
    label_col: Option<usize>,
    /// Leading lines of --data to skip.
    #[arg(long, default_value_t = 0)]
    skip_rows: usize,
    /// Scale every sample to unit ℓ2 norm.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct ModelArgs {
    /// poly:D[:GAMMA] or rbf:GAMMA.
    #[arg(long, default_value = "poly:2")]
    kernel: String,
    /// Target rank r.
    #[arg(long, default_value_t = 2)]
    rank: usize,
    /// Oversampling l; the sketch has r + l columns.
    #[arg(long, default_value_t = 10)]
    oversample: usize,
    /// Number of clusters (default: number of true classes).
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 20)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Kernel columns generated per block.
    #[arg(long, default_value_t = kkm::kernel::DEFAULT_BLOCK_WIDTH)]
    block_width: usize,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// one-pass, gaussian, nystrom, exact, full-kkm or raw-kmeans.
    #[arg(long, default_value = "one-pass")]
    method: String,
    /// Nyström column count m.
    #[arg(long)]
    samples: Option<usize>,
    /// Also write the cluster labels, one per line.
    #[arg(long)]
    labels_out: Option<PathBuf>,
    /// JSON destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "one-pass,nystrom")]
    method: Vec<String>,
    /// Comma-separated Nyström column counts.
    #[arg(long, value_delimiter = ',')]
    samples: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Per-trial CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-cell means CSV (default: next to --out as *.summary.csv; none without --out).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    /// one-pass, gaussian, nystrom or exact.
    #[arg(long, default_value = "one-pass")]
    method: String,
    /// Samples per instance (at most 12).
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Feature dimension of the random samples.
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    #[arg(long, default_value_t = 2)]
    rank: usize,
    #[arg(long, default_value_t = 2)]
    oversample: usize,
    /// Nyström column count m.
    #[arg(long)]
    samples: Option<usize>,
    /// Fixed kernel (default: alternate poly:2:1 and rbf:0.5).
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-trial CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_data() {
            2
        } else if e.is_numerical() {
            3
        } else {
            1
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult<u8> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::InvalidArgument("--threads must be >= 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Cluster(args) => cluster(args).map(|()| 0),
        Command::Compare(args) => compare(args).map(|()| 0),
        Command::BoundCheck(args) => bound_check(args),
    }
}

fn load(args: &DataArgs, seed: u64) -> CliResult<LabeledDataset> {
    let mut ds = match (&args.generate, &args.data) {
        (Some(spec), None) => {
            let (name, n) = spec
                .split_once(':')
                .and_then(|(name, n)| Some((name, n.parse::<usize>().ok()?)))
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("bad --generate '{spec}', want NAME:N"))
                })?;
            data::generate(name, n, seed)?
        }
        (None, Some(path)) => data::load_csv(
            path,
            &CsvOptions {
                label_column: args.label_col,
                skip_rows: args.skip_rows,
            },
        )?,
        _ => {
            return Err(
                Error::InvalidArgument("give exactly one of --generate or --data".into()).into(),
            )
        }
    };
    if args.normalize {
        ds.data = data::normalize_rows_unit_l2(&ds.data)?.0;
    }
    info!("loaded '{}': n = {}, p = {}", ds.name, ds.n(), ds.data.p());
    Ok(ds)
}

fn pipeline(
    model: &ModelArgs,
    method: PipelineMethod,
    samples: Option<usize>,
) -> CliResult<PipelineConfig> {
    let kernel: KernelSpec = model.kernel.parse()?;
    let mut cfg = PipelineConfig::new(method, kernel, model.rank);
    cfg.oversample = model.oversample;
    cfg.samples = samples;
    cfg.clusters = model.clusters;
    cfg.restarts = model.restarts;
    cfg.max_iter = model.max_iter;
    cfg.seed = model.seed;
    cfg.block_width = model.block_width;
    Ok(cfg)
}

/// Opens `path`, or stdout when absent.
fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cluster(args: ClusterArgs) -> CliResult<()> {
    let method: PipelineMethod = args.method.parse()?;
    let cfg = pipeline(&args.model, method, args.samples)?;
    let ds = load(&args.data, args.model.seed)?;
    let (report, labels) = experiment::run_cluster(&ds, &cfg)?;
    let mut out = sink(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    if let Some(path) = &args.labels_out {
        let mut w = sink(Some(path))?;
        for l in labels {
            writeln!(w, "{l}")?;
        }
        w.flush()?;
    }
    Ok(())
}

fn compare(args: CompareArgs) -> CliResult<()> {
    let methods = args
        .method
        .iter()
        .map(|m| m.parse::<PipelineMethod>())
        .collect::<kkm::Result<Vec<_>>>()?;
    let base = pipeline(&args.model, methods[0], None)?;
    let ds = load(&args.data, args.model.seed)?;
    let cfg = CompareConfig {
        methods,
        samples: args.samples,
        base,
        trials: args.trials,
    };
    let rows = experiment::run_compare(&ds, &cfg)?;

    let mut w = csv::Writer::from_writer(sink(args.out.as_deref())?);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;

    let summary_path = args
        .summary
        .or_else(|| args.out.as_ref().map(|p| p.with_extension("summary.csv")));
    if let Some(path) = summary_path {
        let mut s = csv::Writer::from_path(path)?;
        for cell in experiment::summarize(&rows) {
            s.serialize(cell)?;
        }
        s.flush()?;
    }
    Ok(())
}

fn bound_check(args: BoundArgs) -> CliResult<u8> {
    let method: PipelineMethod = args.method.parse()?;
    let kernel = args
        .kernel
        .as_deref()
        .map(str::parse::<KernelSpec>)
        .transpose()?;
    let cfg = BoundCheckConfig {
        trials: args.trials,
        n: args.n,
        dim: args.dim,
        clusters: args.clusters,
        method,
        rank: args.rank,
        oversample: args.oversample,
        samples: args.samples,
        kernel,
        seed: args.seed,
    };
    let trials = experiment::run_bound_check(&cfg)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "{:>5}  {:<10} {:>12} {:>12} {:>12} {:>12}  eq9   eq10",
        "trial", "kernel", "L(C_hat)", "L(C*)", "2|E|_*", "trace(E)"
    )?;
    for t in &trials {
        writeln!(
            stdout,
            "{:>5}  {:<10} {:>12.6e} {:>12.6e} {:>12.6e} {:>12.6e}  {:<5} {}",
            t.trial,
            t.kernel,
            t.l_hat,
            t.l_star,
            t.twice_trace_norm,
            t.trace_e,
            pass(t.trace_norm_bound_holds),
            t.trace_bound_holds.map_or("-", pass),
        )?;
    }
    let failures = trials.iter().filter(|t| !t.passed()).count();
    writeln!(stdout, "{} trials, {failures} violation(s)", trials.len())?;
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_path(path)?;
        for t in &trials {
            w.serialize(t)?;
        }
        w.flush()?;
    }
    Ok(if failures == 0 { 0 } else { 4 })
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}
