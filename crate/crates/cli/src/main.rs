//! `qbias`: command-line front end over the simulator library. Every
//! subcommand reads a JSON run config, emits CSV or JSON to a file or
//! stdout, and exits 0 on success, 2 on a config problem, 3 when the
//! verification suite finds a violated invariant.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qbias_core::error::Error;
use qbias_core::harness::config::{ReportFormat, RunConfig};
use qbias_core::harness::report::{ensemble_rows, render, render_ensemble};
use qbias_core::harness::sim::{run_simulation, sweep_beta};
use qbias_core::harness::verify::{verify, VerificationReport};

#[derive(Parser)]
#[command(
    name = "qbias",
    version,
    about = "Exact and Monte Carlo statistics for measurement protocols under an \
             experience-biased outcome law"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact weighted history table for the configured protocol.
    Enumerate(JobArgs),
    /// Run the seeded Monte Carlo experiment described by the config.
    Simulate(SampledArgs),
    /// Repeat the simulation across several bias strengths.
    Sweep(SweepArgs),
    /// Run the invariant suite against the configured protocol.
    Verify(JobArgs),
}

#[derive(Args)]
struct JobArgs {
    /// Path to a JSON run config.
    config: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format; defaults to the config's `format` field.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args)]
struct SampledArgs {
    #[command(flatten)]
    job: JobArgs,
    /// Worker threads for trial sampling; the report is identical either way.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    job: JobArgs,
    /// Bias strengths to sweep, one report row each.
    #[arg(long, num_args = 1.., required = true)]
    betas: Vec<f64>,
    /// Worker threads for trial sampling; the report is identical either way.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(arg: FormatArg) -> Self {
        match arg {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Verification,
    Other(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Verification => 3,
            Failure::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Other(m) => m,
            Failure::Verification => "verification failed",
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ConfigError(_) => Failure::Config(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Enumerate(job) => {
            let config = load(&job)?;
            let spec = config.build_protocol()?;
            let (rows, _) = ensemble_rows(&spec, &config.policy()?)?;
            emit(&job, render_ensemble(&rows, format_for(&job, &config))?)
        }
        Command::Simulate(args) => {
            configure_threads(args.threads)?;
            let config = load(&args.job)?;
            let report = run_simulation(&config)?;
            emit(&args.job, render(&[report], format_for(&args.job, &config))?)
        }
        Command::Sweep(args) => {
            configure_threads(args.threads)?;
            let config = load(&args.job)?;
            let reports = sweep_beta(&config, &args.betas)?;
            emit(&args.job, render(&reports, format_for(&args.job, &config))?)
        }
        Command::Verify(job) => {
            let config = load(&job)?;
            let report = verify(&config)?;
            emit(&job, report.render_as(format_for(&job, &config))?)?;
            verification_outcome(&report)
        }
    }
}

// An unreadable or unparsable config is an exit-2 problem no matter which
// error variant the loader surfaces.
fn load(job: &JobArgs) -> Result<RunConfig, Failure> {
    let config =
        RunConfig::from_json_file(&job.config).map_err(|e| Failure::Config(e.to_string()))?;
    config.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(config)
}

fn format_for(job: &JobArgs, config: &RunConfig) -> ReportFormat {
    job.format.map(ReportFormat::from).unwrap_or(config.format)
}

fn configure_threads(threads: Option<usize>) -> Result<(), Failure> {
    let Some(count) = threads else { return Ok(()) };
    if count == 0 {
        return Err(Failure::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(count)
        .build_global()
        .map_err(|e| Failure::Other(format!("thread pool setup failed: {e}")))
}

fn emit(job: &JobArgs, content: String) -> Result<(), Failure> {
    match &job.out {
        Some(path) => fs::write(path, content)
            .map_err(|e| Failure::Other(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn verification_outcome(report: &VerificationReport) -> Result<(), Failure> {
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}
