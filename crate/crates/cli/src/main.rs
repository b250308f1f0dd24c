//! `tunesel`: variable selection for tuning data.
//!
//! Subcommands: `generate` a synthetic dataset, `select` variables by
//! training the masked network, run the `exhaustive` least-squares oracle,
//! `bench` wall-time scaling, and pretty-print a saved `report`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 training
//! failure, 4 evaluation budget exceeded. Failures print a single JSON
//! line on standard error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tunesel_core::ingest::write_csv;
use tunesel_core::mask::TrainConfig;
use tunesel_core::pipeline::{read_json, run_pipeline, write_json, DataSource, RunConfig};
use tunesel_core::plot::loglog_chart;
use tunesel_core::scaling::{
    fit_loglog_slope, run_exhaustive_benchmark, run_scaling_benchmark, write_bench_csv,
    BenchResult,
};
use tunesel_core::selection::{
    exhaustive_search, ExhaustiveOptions, SelectionMethod, SelectionReport,
};
use tunesel_core::synthetic::{generate_dut_dataset, ResponseKind, SyntheticSpec};
use tunesel_core::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(
    name = "tunesel",
    version,
    about = "Rank and select relevant tuning variables with a learnable feature mask"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tuning dataset with a known relevant set
    Generate(GenerateArgs),
    /// Train the masked network, rank variables, choose a subset
    Select(SelectArgs),
    /// Score candidate subsets exhaustively with least squares
    Exhaustive(ExhaustiveArgs),
    /// Measure wall-time scaling across candidate counts
    Bench(BenchArgs),
    /// Print a saved report in human-readable form
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SyntheticKind {
    /// 11 variables, single figure of merit driven by t1..t5
    Replica,
    /// Two targets driven by t1,t2 and t3
    TwoTargets,
}

impl From<SyntheticKind> for ResponseKind {
    fn from(kind: SyntheticKind) -> Self {
        match kind {
            SyntheticKind::Replica => ResponseKind::ReplicaFom,
            SyntheticKind::TwoTargets => ResponseKind::TwoTargets,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory for data.csv, schema.json, truth.json
    #[arg(long)]
    out: PathBuf,
    /// Rows to generate
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the response noise
    #[arg(long, default_value_t = 0.05)]
    noise_sd: f64,
    #[arg(long, value_enum, default_value_t = SyntheticKind::Replica)]
    response: SyntheticKind,
}

/// Where the data comes from: exactly one of --input or --synthetic.
#[derive(Args)]
struct SourceArgs {
    /// CSV input (header row; empty fields are missing values)
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Schema sidecar for --input: JSON array of {name, kind, role}
    #[arg(long, requires = "input")]
    schema: Option<PathBuf>,
    /// Built-in synthetic dataset
    #[arg(long, value_enum)]
    synthetic: Option<SyntheticKind>,
    /// Target column name (repeat for multiple targets)
    #[arg(long = "target")]
    targets: Vec<String>,
    /// Rows for --synthetic
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Response noise for --synthetic
    #[arg(long, default_value_t = 0.05)]
    noise_sd: f64,
}

impl SourceArgs {
    fn to_source(&self, seed: u64) -> Result<DataSource> {
        match (&self.input, self.synthetic) {
            (Some(path), None) => Ok(DataSource::CsvFile {
                path: path.clone(),
                schema: self.schema.clone(),
            }),
            (None, Some(kind)) => Ok(DataSource::Synthetic(SyntheticSpec {
                n: self.n,
                noise_sd: self.noise_sd,
                seed,
                response: kind.into(),
            })),
            _ => Err(Error::InvalidConfig(
                "provide exactly one of --input PATH or --synthetic KIND".into(),
            )),
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Keep the top k variables (omit for the automatic elbow cut)
    #[arg(long)]
    k: Option<usize>,
    /// Softmax temperature of the mask generator
    #[arg(long, default_value_t = 0.5)]
    temperature: f64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also run the exhaustive oracle and record the agreement
    #[arg(long)]
    compare_exhaustive: bool,
    /// Largest subset size the oracle enumerates
    #[arg(long, default_value_t = 6)]
    max_subset: usize,
    /// Worker threads for the oracle
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Output directory for report.json, mask.json, history.csv, scores.svg
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExhaustiveArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 6)]
    max_subset: usize,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Stop after this many subset evaluations (partial results, exit 4)
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for exhaustive.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchMethod {
    Mask,
    Exhaustive,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    method: BenchMethod,
    /// Candidate counts to measure (comma-separated, ascending)
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Rows per generated dataset
    #[arg(long)]
    n: Option<usize>,
    /// Timed repetitions per point (after one discarded warm-up)
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Output directory for bench.json, bench.csv, bench.svg
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json, or a directory containing one
    path: PathBuf,
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn emit_error(class: ErrorClass, message: &str) {
    let line = serde_json::json!({
        "error": class.as_str(),
        "message": message,
    });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            emit_error(ErrorClass::Usage, &e.to_string());
            return ExitCode::from(ErrorClass::Usage.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let class = e.class();
            emit_error(class, &e.to_string());
            ExitCode::from(class.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Select(args) => select(args),
        Command::Exhaustive(args) => exhaustive(args),
        Command::Bench(args) => bench(args),
        Command::Report(args) => report(args),
    }
}

fn ensure_dir(dir: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.clone(),
        source,
    })
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let spec = SyntheticSpec {
        n: args.n,
        noise_sd: args.noise_sd,
        seed: args.seed,
        response: args.response.into(),
    };
    let (table, truth) = generate_dut_dataset(&spec)?;
    ensure_dir(&args.out)?;
    write_csv(&table, &args.out.join("data.csv"))?;
    write_json(&table.schema().to_vec(), &args.out.join("schema.json"))?;
    write_json(&truth, &args.out.join("truth.json"))?;
    println!(
        "wrote {} rows x {} columns to {}",
        table.n_rows(),
        table.schema().len(),
        args.out.join("data.csv").display()
    );
    println!("relevant: {}", truth.relevant.join(" "));
    Ok(ExitCode::SUCCESS)
}

fn select(args: SelectArgs) -> Result<ExitCode> {
    let mut config = RunConfig::new(args.source.to_source(args.seed)?, args.out.clone());
    config.targets = args.source.targets.clone();
    config.train = TrainConfig {
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    config.stack.temperature = args.temperature;
    config.k = args.k;
    config.compare_exhaustive = args.compare_exhaustive;
    config.max_subset_size = args.max_subset;
    config.workers = args.workers;

    let output = run_pipeline(&config)?;
    print_report(&output.report);
    println!("report: {}", args.out.join("report.json").display());
    Ok(ExitCode::SUCCESS)
}

fn exhaustive(args: ExhaustiveArgs) -> Result<ExitCode> {
    let source = args.source.to_source(args.seed)?;
    let data = match &source {
        DataSource::Synthetic(spec) => {
            let (table, _) = generate_dut_dataset(spec)?;
            tunesel_core::ingest::fit_encode(&table)?
        }
        DataSource::CsvFile { path, schema } => {
            let table = match schema {
                Some(sidecar) => {
                    let declared = tunesel_core::ingest::load_schema_sidecar(sidecar)?;
                    tunesel_core::ingest::load_table(path, Some(&declared))?
                }
                None => {
                    if args.source.targets.is_empty() {
                        return Err(Error::MissingRole { role: "target" });
                    }
                    let table = tunesel_core::ingest::load_table(path, None)?;
                    let schema =
                        tunesel_core::ingest::infer_schema(&table, &args.source.targets)?;
                    table.with_schema(schema)?
                }
            };
            tunesel_core::ingest::fit_encode(&table)?
        }
    };
    let options = ExhaustiveOptions {
        split_seed: args.seed,
        workers: args.workers,
        max_evaluations: args.budget,
    };
    let result = exhaustive_search(&data, args.max_subset, &options)?;
    ensure_dir(&args.out)?;
    write_json(&result, &args.out.join("exhaustive.json"))?;
    for score in &result.best_per_size {
        println!(
            "size {}: {} (validation mse {:.6e})",
            score.subset.len(),
            score.subset.join(" "),
            score.validation_mse
        );
    }
    println!("chosen: {}", result.chosen.join(" "));
    println!("evaluated {} of {} planned subsets", result.evaluated, result.planned);
    if result.budget_exceeded {
        println!("budget exceeded; results above are partial");
        return Ok(ExitCode::from(ErrorClass::Budget.exit_code() as u8));
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let result: BenchResult = match args.method {
        BenchMethod::Mask => {
            let dims = args.dims.unwrap_or_else(|| vec![11, 50, 100, 200, 400]);
            let config = TrainConfig {
                batch_size: args.batch_size,
                epochs: args.epochs,
                seed: args.seed,
                ..TrainConfig::default()
            };
            run_scaling_benchmark(&dims, args.n.unwrap_or(10_000), &config, args.reps)?
        }
        BenchMethod::Exhaustive => {
            let dims = args.dims.unwrap_or_else(|| vec![6, 8, 10, 12]);
            run_exhaustive_benchmark(&dims, args.n.unwrap_or(2_000), args.seed)?
        }
    };
    ensure_dir(&args.out)?;
    write_json(&result, &args.out.join("bench.json"))?;
    write_bench_csv(&result, &args.out.join("bench.csv"))?;
    let series: Vec<(f64, f64)> = result
        .points
        .iter()
        .filter(|p| p.note.is_none() && p.seconds > 0.0)
        .map(|p| (p.d as f64, p.seconds))
        .collect();
    if series.len() >= 2 {
        let svg = loglog_chart("wall time vs candidate variables", &series)?;
        let path = args.out.join("bench.svg");
        std::fs::write(&path, svg).map_err(|source| Error::Write { path, source })?;
    }
    for p in &result.points {
        match &p.note {
            Some(note) => println!("d={}: {note}", p.d),
            None => match p.subsets {
                Some(subsets) => println!(
                    "d={}: median {:.4}s over {} reps ({subsets} subsets)",
                    p.d, p.seconds, p.repetitions
                ),
                None => println!(
                    "d={}: median {:.4}s over {} reps",
                    p.d, p.seconds, p.repetitions
                ),
            },
        }
    }
    if series.len() >= 3 {
        println!("log-log slope: {:.3}", fit_loglog_slope(&result)?);
    }
    println!("environment: {}", result.environment);
    Ok(ExitCode::SUCCESS)
}

fn report(args: ReportArgs) -> Result<ExitCode> {
    let path = if args.path.is_dir() {
        args.path.join("report.json")
    } else {
        args.path.clone()
    };
    let report: SelectionReport = read_json(&path)?;
    print_report(&report);
    Ok(ExitCode::SUCCESS)
}

fn print_report(report: &SelectionReport) {
    let method = match report.method {
        SelectionMethod::Mask => "mask",
        SelectionMethod::Exhaustive => "exhaustive",
    };
    println!(
        "method {method}, seed {}, trained in {:.2}s",
        report.seed, report.training_seconds
    );
    println!("chosen: {}", report.chosen.join(" "));
    for r in report.ranking.iter().take(10) {
        println!("  #{:<2} {:<12} {:.6}", r.rank, r.name, r.score);
    }
    if report.ranking.len() > 10 {
        println!("  ... {} more", report.ranking.len() - 10);
    }
    if let Some(agreement) = &report.oracle_agreement {
        println!(
            "oracle agreement: jaccard {:.3}, identical {}",
            agreement.jaccard, agreement.identical
        );
    }
}
