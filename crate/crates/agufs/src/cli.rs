//! The `agufs` command line: `run`, `select`, `eval` and `version`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use agufs_core::{evaluate_selection, run_agufs_with, AgufsConfig, Error as SolverError, RunOptions};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::data::{load_csv, standardize, CsvOptions, DataError, Dataset, LabelColumn, Standardize};
use crate::record::{read_scores, strip_timings, timestamp_now, write_outputs, DataSummary, RunRecord};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "agufs", version, about = "Unsupervised feature selection with an adaptive graph and uncorrelated constraint")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select features and evaluate them with repeated K-means.
    Run(RunArgs),
    /// Select features only.
    Select(SelectArgs),
    /// Evaluate a given feature selection with repeated K-means.
    Eval(EvalArgs),
    /// Print version information.
    Version,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with one sample per line.
    #[arg(long)]
    pub data: PathBuf,
    /// Treat the first line as feature names.
    #[arg(long)]
    pub has_header: bool,
    /// Class label column: `none`, `last` or a zero-based index.
    #[arg(long, default_value = "none")]
    pub label_column: LabelColumn,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long, value_enum, default_value_t = Standardize::Zscore)]
    pub standardize: Standardize,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Weight of the graph terms [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the row-sparsity term [default: 1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Neighbors per sample in the learned graph [default: 5]
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of clusters [default: 3]
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Number of features to select [default: 10]
    #[arg(long)]
    pub top: Option<usize>,
    /// Smoothing of the row-sparsity reweighting [default: 1e-6]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// [default: 30]
    #[arg(long)]
    pub max_outer_iters: Option<usize>,
    /// Relative objective change that stops the outer loop [default: 1e-5]
    #[arg(long)]
    pub outer_tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// [default: 20]
    #[arg(long)]
    pub w_max_inner_iters: Option<usize>,
    /// [default: 1e-6]
    #[arg(long)]
    pub w_tol: Option<f64>,
    /// [default: 50]
    #[arg(long)]
    pub f_max_inner_iters: Option<usize>,
    /// [default: 1e-8]
    #[arg(long)]
    pub f_tol: Option<f64>,
}

impl SolverArgs {
    pub fn config(&self) -> AgufsConfig {
        let d = AgufsConfig::default();
        AgufsConfig {
            alpha: self.alpha.unwrap_or(d.alpha),
            lambda: self.lambda.unwrap_or(d.lambda),
            k: self.k.unwrap_or(d.k),
            c: self.clusters.unwrap_or(d.c),
            top_t: self.top.unwrap_or(d.top_t),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            max_outer_iters: self.max_outer_iters.unwrap_or(d.max_outer_iters),
            outer_tol: self.outer_tol.unwrap_or(d.outer_tol),
            seed: self.seed,
            w_max_inner_iters: self.w_max_inner_iters.unwrap_or(d.w_max_inner_iters),
            w_tol: self.w_tol.unwrap_or(d.w_tol),
            f_max_inner_iters: self.f_max_inner_iters.unwrap_or(d.f_max_inner_iters),
            f_tol: self.f_tol.unwrap_or(d.f_tol),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// K-means restarts for evaluation.
    #[arg(long, default_value_t = 30)]
    pub restarts: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated zero-based feature indices.
    #[arg(long, value_delimiter = ',', required_unless_present = "scores", conflicts_with = "scores")]
    pub features: Vec<usize>,
    /// A `scores.csv` from a previous run; its selected features are used.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Number of K-means clusters [default: number of classes]
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long, default_value_t = 30)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(DataError::Io { .. }) => EXIT_IO,
            CliError::Data(_) => EXIT_PARSE,
            CliError::Solver(SolverError::InvalidParameter { .. }) => EXIT_USAGE,
            CliError::Solver(_) => EXIT_NUMERIC,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("agufs: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(a) => pipeline(&a.data, &a.solver, Some(a.restarts), &a.out),
        Command::Select(a) => pipeline(&a.data, &a.solver, None, &a.out),
        Command::Eval(a) => eval(&a),
        Command::Version => {
            println!("agufs {} (agufs-core {})", env!("CARGO_PKG_VERSION"), agufs_core::VERSION);
            Ok(())
        }
    }
}

fn load(args: &DataArgs) -> Result<(Dataset, Vec<usize>), CliError> {
    if !args.delimiter.is_ascii() {
        return Err(CliError::Usage("--delimiter must be a single ASCII character".into()));
    }
    let opts = CsvOptions {
        has_header: args.has_header,
        label_column: args.label_column,
        delimiter: args.delimiter as u8,
    };
    let ds = load_csv(&args.data, &opts)?;
    Ok(standardize(ds, args.standardize))
}

fn pipeline(data: &DataArgs, solver: &SolverArgs, restarts: Option<usize>, out: &Path) -> Result<(), CliError> {
    let (ds, constant_features) = load(data)?;
    let cfg = solver.config();
    let t0 = Instant::now();
    let clock = move || t0.elapsed().as_secs_f64();
    let output = run_agufs_with(
        &ds.x,
        &cfg,
        RunOptions {
            clock: Some(&clock),
            ..Default::default()
        },
    )?;

    let eval = match (restarts, &ds.labels) {
        (Some(restarts), Some(labels)) => {
            let classes = ds.classes().unwrap_or(0);
            Some(evaluate_selection(&ds.x, labels, &output.ranking.selected, classes, restarts, cfg.seed)?)
        }
        (Some(_), None) => {
            log::warn!("no label column given; skipping evaluation");
            None
        }
        _ => None,
    };

    let record = RunRecord {
        version: env!("CARGO_PKG_VERSION").to_owned(),
        timestamp: timestamp_now(),
        data: summary(&ds, data, constant_features),
        config: cfg,
        ranking: output.ranking.clone(),
        trace: strip_timings(&output.trace),
        eval,
        warnings: output.warnings.clone(),
    };
    write_outputs(out, &record, &output.trace, ds.feature_names.as_deref())?;

    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "selected: {:?}", record.ranking.selected)?;
    if let Some(e) = &record.eval {
        writeln!(
            stdout,
            "ACC {:.4} ± {:.4}  NMI {:.4} ± {:.4}  ({} restarts)",
            e.acc_mean, e.acc_std, e.nmi_mean, e.nmi_std, e.restarts
        )?;
    }
    Ok(())
}

fn summary(ds: &Dataset, data: &DataArgs, constant_features: Vec<usize>) -> DataSummary {
    DataSummary {
        path: ds.source_path.clone(),
        samples: ds.samples(),
        features: ds.features(),
        classes: ds.classes(),
        label_column: data.label_column,
        standardize: data.standardize,
        constant_features,
    }
}

fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let (ds, _) = load(&args.data)?;
    let labels = ds
        .labels
        .as_ref()
        .ok_or_else(|| CliError::Usage("eval needs --label-column".into()))?;
    let features = match &args.scores {
        Some(path) => read_scores(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            .into_iter()
            .filter(|r| r.selected)
            .map(|r| r.feature)
            .collect(),
        None => args.features.clone(),
    };
    if let Some(&bad) = features.iter().find(|&&f| f >= ds.features()) {
        return Err(CliError::Usage(format!(
            "feature {bad} out of range for {} features",
            ds.features()
        )));
    }
    let k = args.clusters.or(ds.classes()).unwrap_or(0);
    let report = evaluate_selection(&ds.x, labels, &features, k, args.restarts, args.seed)?;
    let json = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
    println!("{json}");
    Ok(())
}
