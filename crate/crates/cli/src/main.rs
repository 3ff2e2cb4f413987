//! Command-line front end: `losvm score`, `losvm sweep-gamma`, `losvm synth`.
//!
//! Runs are reproducible: with identical flags and seed the output files are
//! byte-identical (opt into `--timings` to record per-batch wall time, which
//! gives up that guarantee). Every output file embeds the fully resolved
//! configuration, including the gamma value actually used.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use losvm_core::dataset::{load_csv, standardize, synth_dirty, total_variance, DataMatrix};
use losvm_core::kernel::{gamma_scott, gamma_silverman, gamma_sklearn, KernelContext, KernelKind};
use losvm_core::losvm::{run_losvm_with, RemovalTrace, RunOptions};
use losvm_core::metrics::{knn_baseline, ScoreReport};
use losvm_core::solver::Variant;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "losvm",
    version,
    about = "Leave-out one-class SVM / SVDD outlier detection on dirty data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, leave-out score, and optionally remove the worst support
    /// vectors in batches
    Score(ScoreArgs),
    /// Re-run scoring with gamma scaled by 10^f over a grid of f and
    /// tabulate the metrics
    SweepGamma(SweepArgs),
    /// Generate the synthetic two-cluster benchmark with uniform noise
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum VariantArg {
    Ocsvm,
    Svdd,
}

impl VariantArg {
    fn to_variant(self) -> Variant {
        match self {
            VariantArg::Ocsvm => Variant::Ocsvm,
            VariantArg::Svdd => Variant::Svdd,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            VariantArg::Ocsvm => "ocsvm",
            VariantArg::Svdd => "svdd",
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum HeuristicArg {
    Scott,
    Sklearn,
    Silverman,
}

impl HeuristicArg {
    fn as_str(self) -> &'static str {
        match self {
            HeuristicArg::Scott => "scott",
            HeuristicArg::Sklearn => "sklearn",
            HeuristicArg::Silverman => "silverman",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Knn,
}

#[derive(Args)]
struct ScoreArgs {
    /// Input CSV: comma separated, optional header, '#' lines skipped
    #[arg(long)]
    input: PathBuf,

    /// Header name of the label column (values 0/1 or no/yes)
    #[arg(long)]
    label_column: Option<String>,

    #[arg(long, value_enum, default_value_t = VariantArg::Svdd)]
    variant: VariantArg,

    /// Box bound C of the dual (conflicts with --nu)
    #[arg(long = "C", conflicts_with = "nu")]
    c: Option<f64>,

    /// Slack share nu in (0, 1]; resolved to C = 1/(nu N)
    #[arg(long)]
    nu: Option<f64>,

    /// Explicit kernel gamma (conflicts with --gamma-heuristic)
    #[arg(long, conflicts_with = "gamma_heuristic")]
    gamma: Option<f64>,

    #[arg(long, value_enum, default_value_t = HeuristicArg::Silverman)]
    gamma_heuristic: HeuristicArg,

    /// Scale the base gamma by 10^f; values outside [-1, 1] or off the
    /// 0.25 grid are accepted with a warning
    #[arg(long, default_value_t = 0.0)]
    gamma_factor: f64,

    /// Total number of points to remove (defaults to --b when that is set)
    #[arg(long = "R")]
    r: Option<usize>,

    /// Number of batches removing R/b points each (defaults to --R)
    #[arg(long = "b")]
    b: Option<usize>,

    /// Solver convergence tolerance on the KKT gap
    #[arg(long, default_value_t = losvm_core::solver::DEFAULT_EPS)]
    eps: f64,

    /// Recorded in the outputs for provenance; scoring itself is
    /// deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Scores CSV output path
    #[arg(long, default_value = "losvm_scores.csv")]
    out: PathBuf,

    /// Trace JSON output path
    #[arg(long, default_value = "losvm_trace.json")]
    trace: PathBuf,

    /// Score with a baseline instead of the SVM pipeline
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,

    /// Neighbor count for the knn baseline
    #[arg(long, default_value_t = 1)]
    k: usize,

    /// Worker threads for kernel precomputation; affects wall time only,
    /// never output values
    #[arg(long, default_value_t = 1)]
    threads: usize,

    /// Record per-batch wall time in the trace (outputs stop being
    /// byte-reproducible)
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,

    /// Label column; the sweep is an evaluation tool and needs labels
    #[arg(long)]
    label_column: String,

    #[arg(long, value_enum, default_value_t = VariantArg::Svdd)]
    variant: VariantArg,

    #[arg(long = "C", conflicts_with = "nu")]
    c: Option<f64>,

    #[arg(long)]
    nu: Option<f64>,

    #[arg(long, conflicts_with = "gamma_heuristic")]
    gamma: Option<f64>,

    #[arg(long, value_enum, default_value_t = HeuristicArg::Silverman)]
    gamma_heuristic: HeuristicArg,

    #[arg(long, default_value_t = -1.0)]
    f_min: f64,

    #[arg(long, default_value_t = 1.0)]
    f_max: f64,

    #[arg(long, default_value_t = 0.25)]
    f_step: f64,

    #[arg(long = "R")]
    r: Option<usize>,

    #[arg(long = "b")]
    b: Option<usize>,

    #[arg(long, default_value_t = losvm_core::solver::DEFAULT_EPS)]
    eps: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Sweep table CSV output path
    #[arg(long, default_value = "losvm_sweep.csv")]
    out: PathBuf,

    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    n_cluster: usize,

    #[arg(long, default_value_t = 25)]
    n_noise: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Output CSV path (loadable by `losvm score --label-column outlier`)
    #[arg(long, default_value = "losvm_synth.csv")]
    out: PathBuf,
}

enum CliError {
    /// Inconsistent flags or parameters; exit code 2.
    Config(String),
    /// Anything that went wrong while running; exit code 1.
    Runtime(String),
}

impl From<losvm_core::Error> for CliError {
    fn from(e: losvm_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(args) => cmd_score(&args),
        Command::SweepGamma(args) => cmd_sweep_gamma(&args),
        Command::Synth(args) => cmd_synth(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Fully resolved run parameters, embedded in every output file.
#[derive(Serialize)]
struct ResolvedConfig {
    command: &'static str,
    input: String,
    label_column: Option<String>,
    baseline: Option<&'static str>,
    k: Option<usize>,
    variant: &'static str,
    nu: Option<f64>,
    c: f64,
    gamma_source: &'static str,
    gamma_base: Option<f64>,
    gamma_factor: f64,
    gamma_used: Option<f64>,
    r: usize,
    b: usize,
    eps: f64,
    seed: u64,
    threads: usize,
    timings: bool,
    rows: usize,
    dims: usize,
    rows_dropped_missing: usize,
    rows_dropped_duplicates: usize,
}

fn warn_gamma_factor(f: f64) {
    let off_grid = ((f / 0.25) - (f / 0.25).round()).abs() > 1e-9;
    if !(-1.0..=1.0).contains(&f) || off_grid {
        eprintln!(
            "warning: gamma factor {f} is outside the usual grid \
             (-1 to 1 in steps of 0.25)"
        );
    }
}

fn resolve_c(c: Option<f64>, nu: Option<f64>, n: usize) -> Result<f64, CliError> {
    match (c, nu) {
        (Some(c), None) => {
            if c <= 0.0 {
                return Err(CliError::Config(format!("C must be positive, got {c}")));
            }
            Ok(c)
        }
        (None, Some(nu)) => {
            if !(nu > 0.0 && nu <= 1.0) {
                return Err(CliError::Config(format!("nu must lie in (0, 1], got {nu}")));
            }
            Ok(1.0 / (nu * n as f64))
        }
        (None, None) => Ok(1.0),
        (Some(_), Some(_)) => unreachable!("clap rejects --C with --nu"),
    }
}

/// R defaults to b (one point per batch) and b defaults to R (single-point
/// batches); with neither set, no removal happens.
fn resolve_removal(r: Option<usize>, b: Option<usize>, n: usize) -> Result<(usize, usize), CliError> {
    let (r, b) = match (r, b) {
        (Some(r), Some(b)) => (r, b),
        (Some(r), None) => (r, r.max(1)),
        (None, Some(b)) => (b, b),
        (None, None) => (0, 1),
    };
    if b == 0 || (r > 0 && r % b != 0) {
        return Err(CliError::Config(format!(
            "batch count b = {b} must be >= 1 and divide R = {r}"
        )));
    }
    if r >= n {
        return Err(CliError::Config(format!(
            "removal budget R = {r} must be smaller than the data set size {n}"
        )));
    }
    Ok((r, b))
}

struct LoadedData {
    data: DataMatrix,
    var: f64,
}

fn load_standardized(input: &Path, label_column: Option<&str>) -> Result<LoadedData, CliError> {
    let raw = load_csv(input, label_column)?;
    if raw.dropped_missing() > 0 || raw.dropped_duplicates() > 0 {
        eprintln!(
            "cleaned {}: dropped {} rows with missing values, {} duplicate rows",
            input.display(),
            raw.dropped_missing(),
            raw.dropped_duplicates()
        );
    }
    let data = standardize(&raw)?;
    let var = total_variance(&data)?;
    Ok(LoadedData { data, var })
}

fn resolve_gamma(
    explicit: Option<f64>,
    heuristic: HeuristicArg,
    n: usize,
    d: usize,
    var: f64,
) -> Result<(&'static str, f64), CliError> {
    match explicit {
        Some(g) => {
            if g <= 0.0 {
                return Err(CliError::Config(format!("gamma must be positive, got {g}")));
            }
            Ok(("explicit", g))
        }
        None => {
            let g = match heuristic {
                HeuristicArg::Scott => gamma_scott(n, d, var)?,
                HeuristicArg::Sklearn => gamma_sklearn(d, var)?,
                HeuristicArg::Silverman => gamma_silverman(n, d, var)?,
            };
            Ok((heuristic.as_str(), g))
        }
    }
}

fn empty_trace() -> RemovalTrace {
    RemovalTrace {
        total_requested: 0,
        batch_count: 0,
        removed_total: 0,
        early_stopped: false,
        initial_train_pair_updates: 0,
        initial_eval_pair_updates: 0,
        final_eval_pair_updates: 0,
        batches: Vec::new(),
    }
}

fn cmd_score(args: &ScoreArgs) -> Result<(), CliError> {
    if args.k == 0 {
        return Err(CliError::Config("k must be at least 1".into()));
    }
    warn_gamma_factor(args.gamma_factor);
    let LoadedData { data, var } = load_standardized(&args.input, args.label_column.as_deref())?;
    let n = data.n_rows();
    let d = data.dims();
    let c = resolve_c(args.c, args.nu, n)?;
    let (r, b) = resolve_removal(args.r, args.b, n)?;

    let (report, trace, gamma_source, gamma_base, gamma_used) = match args.baseline {
        Some(BaselineArg::Knn) => {
            let report = knn_baseline(&data, args.k)?;
            (report, empty_trace(), "none", None, None)
        }
        None => {
            let (source, base) =
                resolve_gamma(args.gamma, args.gamma_heuristic, n, d, var)?;
            let gamma = 10f64.powf(args.gamma_factor) * base;
            let mut ctx = KernelContext::new(&data, KernelKind::Rbf { gamma });
            if args.threads > 1 {
                ctx.prewarm(args.threads);
            }
            let options = RunOptions {
                collect_timings: args.timings,
            };
            let (report, trace) =
                run_losvm_with(&mut ctx, args.variant.to_variant(), c, args.eps, r, b, &options)?;
            (report, trace, source, Some(base), Some(gamma))
        }
    };

    let config = ResolvedConfig {
        command: "score",
        input: args.input.display().to_string(),
        label_column: args.label_column.clone(),
        baseline: args.baseline.map(|BaselineArg::Knn| "knn"),
        k: args.baseline.map(|BaselineArg::Knn| args.k),
        variant: args.variant.as_str(),
        nu: args.nu,
        c,
        gamma_source,
        gamma_base,
        gamma_factor: args.gamma_factor,
        gamma_used,
        r,
        b,
        eps: args.eps,
        seed: args.seed,
        threads: args.threads,
        timings: args.timings,
        rows: n,
        dims: d,
        rows_dropped_missing: data.dropped_missing(),
        rows_dropped_duplicates: data.dropped_duplicates(),
    };
    let config_json =
        serde_json::to_string(&config).map_err(|e| CliError::Runtime(e.to_string()))?;

    write_scores_csv(&args.out, &config_json, &report)?;
    write_trace_json(&args.trace, &config, &trace)?;

    println!(
        "scored {} points ({} removed over {} batches)",
        report.total,
        trace.removed_total,
        trace.batches.len()
    );
    if trace.early_stopped {
        eprintln!(
            "warning: support-vector pool exhausted, removed {} of {} requested points",
            trace.removed_total, trace.total_requested
        );
    }
    if let Some(m) = &report.metrics {
        println!(
            "avep={:.6} adj_avep={:.6} auroc={:.6} (outliers={}/{})",
            m.average_precision,
            m.adjusted_average_precision,
            m.auroc,
            report.outlier_count,
            report.total
        );
    }
    println!("wrote {} and {}", args.out.display(), args.trace.display());
    Ok(())
}

fn cmd_sweep_gamma(args: &SweepArgs) -> Result<(), CliError> {
    if args.f_step <= 0.0 {
        return Err(CliError::Config(format!(
            "f-step must be positive, got {}",
            args.f_step
        )));
    }
    if args.f_max < args.f_min {
        return Err(CliError::Config(format!(
            "f-max {} is below f-min {}",
            args.f_max, args.f_min
        )));
    }
    let LoadedData { data, var } =
        load_standardized(&args.input, Some(args.label_column.as_str()))?;
    if data.outlier_count() == 0 || data.outlier_count() == data.n_rows() {
        return Err(CliError::Runtime(
            "gamma sweep needs labeled data with both classes".into(),
        ));
    }
    let n = data.n_rows();
    let d = data.dims();
    let c = resolve_c(args.c, args.nu, n)?;
    let (r, b) = resolve_removal(args.r, args.b, n)?;
    let (gamma_source, gamma_base) =
        resolve_gamma(args.gamma, args.gamma_heuristic, n, d, var)?;

    let mut factors = Vec::new();
    let mut f = args.f_min;
    while f <= args.f_max + 1e-9 {
        factors.push(f);
        f += args.f_step;
    }

    let config = ResolvedConfig {
        command: "sweep-gamma",
        input: args.input.display().to_string(),
        label_column: Some(args.label_column.clone()),
        baseline: None,
        k: None,
        variant: args.variant.as_str(),
        nu: args.nu,
        c,
        gamma_source,
        gamma_base: Some(gamma_base),
        gamma_factor: 0.0,
        gamma_used: None,
        r,
        b,
        eps: args.eps,
        seed: args.seed,
        threads: args.threads,
        timings: false,
        rows: n,
        dims: d,
        rows_dropped_missing: data.dropped_missing(),
        rows_dropped_duplicates: data.dropped_duplicates(),
    };
    let config_json =
        serde_json::to_string(&config).map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut table = String::new();
    let _ = writeln!(table, "# config: {config_json}");
    let _ = writeln!(table, "f,gamma,avep,adj_avep,auroc");
    for &f in &factors {
        warn_gamma_factor(f);
        let gamma = 10f64.powf(f) * gamma_base;
        let mut ctx = KernelContext::new(&data, KernelKind::Rbf { gamma });
        if args.threads > 1 {
            ctx.prewarm(args.threads);
        }
        let (report, _) = run_losvm_with(
            &mut ctx,
            args.variant.to_variant(),
            c,
            args.eps,
            r,
            b,
            &RunOptions::default(),
        )?;
        let m = report
            .metrics
            .expect("both classes were checked after loading");
        let _ = writeln!(
            table,
            "{},{},{},{},{}",
            f, gamma, m.average_precision, m.adjusted_average_precision, m.auroc
        );
        println!(
            "f={f:+.2} gamma={gamma:.6} adj_avep={:.6} auroc={:.6}",
            m.adjusted_average_precision, m.auroc
        );
    }
    std::fs::write(&args.out, table)?;
    println!("wrote {} ({} rows)", args.out.display(), factors.len());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    if args.n_cluster < 2 {
        return Err(CliError::Config(format!(
            "n-cluster must be at least 2, got {}",
            args.n_cluster
        )));
    }
    let data = synth_dirty(args.n_cluster, args.n_noise, args.seed);

    #[derive(Serialize)]
    struct SynthConfig {
        command: &'static str,
        n_cluster: usize,
        n_noise: usize,
        seed: u64,
    }
    let config_json = serde_json::to_string(&SynthConfig {
        command: "synth",
        n_cluster: args.n_cluster,
        n_noise: args.n_noise,
        seed: args.seed,
    })
    .map_err(|e| CliError::Runtime(e.to_string()))?;

    let file = File::create(&args.out)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# config: {config_json}")?;
    writeln!(w, "x0,x1,outlier")?;
    let labels = data.labels().expect("synthetic data is labeled");
    for (i, &outlier) in labels.iter().enumerate() {
        let row = data.row(i);
        writeln!(w, "{},{},{}", row[0], row[1], u8::from(outlier))?;
    }
    w.flush()?;
    println!(
        "wrote {} ({} cluster points, {} noise points, seed {})",
        args.out.display(),
        args.n_cluster,
        args.n_noise,
        args.seed
    );
    Ok(())
}

fn write_scores_csv(path: &Path, config_json: &str, report: &ScoreReport) -> Result<(), CliError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# config: {config_json}")?;
    writeln!(w, "id,score,rank,removed_in_batch,method_tag")?;
    for e in &report.entries {
        let removed = e.removed_in_batch.map(|b| b as i64).unwrap_or(-1);
        let tag = e.method.map(|m| m.as_str()).unwrap_or("knn");
        writeln!(w, "{},{},{},{},{}", e.id, e.score, e.rank, removed, tag)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TraceFile<'a> {
    config: &'a ResolvedConfig,
    trace: &'a RemovalTrace,
}

fn write_trace_json(
    path: &Path,
    config: &ResolvedConfig,
    trace: &RemovalTrace,
) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(&TraceFile { config, trace })
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(path, body + "\n")?;
    Ok(())
}
