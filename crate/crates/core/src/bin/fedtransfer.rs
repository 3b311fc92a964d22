use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use fedtransfer::downstream::SweepAxis;
use fedtransfer::error::Error;
use fedtransfer::orchestrator::{
    generate_synthetic, load_reports, load_synthetic_spec, render, run_experiment, run_sweep, write_dataset,
    ExperimentConfig, ReportFormat,
};

/// Root for run directories when `--out` is not given.
const OUT_ENV: &str = "FEDTRANSFER_OUT";

#[derive(Parser)]
#[command(name = "fedtransfer", version, about = "Vertical federated knowledge transfer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: $FEDTRANSFER_OUT/<name>, or runs/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per value of a sweep axis.
    Sweep {
        /// Base configuration (default: built-in defaults).
        #[arg(long)]
        config: Option<PathBuf>,
        /// task_features, data_features, overlap_count or num_data_hospitals.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a comparison table from a run or sweep directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
    },
    /// Write a synthetic dataset as CSV files plus a config that reads them.
    GenSynthetic {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::InvalidArgument(_) => 2,
        Error::Config(_) | Error::ConfigAt { .. } => 3,
        _ => 1,
    }
}

fn fail(kind: &str, message: String, path: Option<&Path>, code: u8) -> ExitCode {
    let mut body = json!({ "error": kind, "message": message });
    if let Some(p) = path {
        body["path"] = json!(p.display().to_string());
    }
    eprintln!("{body}");
    ExitCode::from(code)
}

fn error_path(e: &Error) -> Option<&Path> {
    match e {
        Error::Io { path, .. } | Error::Parse { path, .. } | Error::Csv { path, .. } | Error::ConfigAt { path, .. } => {
            Some(path)
        }
        Error::Stage { source, .. } => error_path(source),
        _ => None,
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    if !path.is_file() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "config file not found")));
    }
    ExperimentConfig::load(path)
}

fn main_inner(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| out_root().join(&cfg.name));
            let outcome = run_experiment(&cfg, &dir)?;
            print!("{}", render(&outcome.reports, ReportFormat::Md)?);
            println!("results: {}", dir.display());
        }
        Command::Sweep { config, axis, values, out } => {
            let axis: SweepAxis = axis.parse()?;
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => ExperimentConfig::default(),
            };
            let dir = out.unwrap_or_else(|| out_root().join(format!("{}-sweep-{axis}", cfg.name)));
            let points = run_sweep(&cfg, axis, &values, &dir)?;
            let reports: Vec<_> = points.iter().flat_map(|(_, o)| o.reports.iter().cloned()).collect();
            print!("{}", render(&reports, ReportFormat::Md)?);
            for (d, _) in &points {
                println!("results: {}", d.display());
            }
        }
        Command::Report { input, format } => {
            let format: ReportFormat = format.parse()?;
            let reports = load_reports(&input)?;
            print!("{}", render(&reports, format)?);
        }
        Command::GenSynthetic { spec, out } => {
            let spec = load_synthetic_spec(&spec)?;
            let ds = generate_synthetic(&spec)?;
            write_dataset(&ds, &out)?;
            println!("wrote {} parties to {}", ds.data.len() + 1, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim().to_owned(), None, 2),
    };
    match main_inner(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string(), error_path(&e), exit_code(&e)),
    }
}
