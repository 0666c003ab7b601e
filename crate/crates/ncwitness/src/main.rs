//! Command-line interface: validate configs, run analyses, sweep g2.
//!
//! Exit codes: 0 = the requested work ran (verdicts live inside the report,
//! never in the exit code), 2 = the config or invocation is invalid, 3 = a
//! runtime failure (provider construction, I/O). All paths are explicit:
//! inputs on the command line, outputs from the config's `[output]` table,
//! stdout when no path is configured.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ncwitness::config::{parse_config, AnalysisConfig, TaskSpec};
use ncwitness::report::{emit, EmitFormat};

#[derive(Parser)]
#[command(
    name = "ncwitness",
    version,
    about = "Certify nonclassical space-time correlations of radiation fields \
             through moment-matrix negativity tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured task and write the JSON report.
    Analyze { config: PathBuf },
    /// Run the configured g2 sweep and write the CSV series.
    #[command(name = "sweep-g2")]
    SweepG2 { config: PathBuf },
    /// Parse a config and report every validation problem.
    Validate { config: PathBuf },
}

const EXIT_CONFIG_INVALID: u8 = 2;
const EXIT_RUNTIME_FAILURE: u8 = 3;

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG_INVALID,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME_FAILURE,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze { config } => analyze(&config),
        Command::SweepG2 { config } => sweep_g2(&config),
        Command::Validate { config } => validate(&config),
    }
}

fn load_config(path: &Path) -> Result<AnalysisConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|issues| {
        let mut message = format!("{}: invalid config\n", path.display());
        for issue in &issues {
            message.push_str(&format!("  {issue}\n"));
        }
        message.pop();
        Failure::config(message)
    })
}

fn write_output(bytes: &[u8], path: Option<&str>) -> Result<(), Failure> {
    match path {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| Failure::runtime(format!("{path}: {e}")))?;
            eprintln!("wrote {path}");
            Ok(())
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::runtime(format!("stdout: {e}"))),
    }
}

fn analyze(path: &Path) -> Result<(), Failure> {
    let config = load_config(path)?;
    let report = ncwitness::run::run(&config).map_err(|e| Failure::runtime(e.to_string()))?;
    let json = emit(&report, EmitFormat::JsonReport)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    write_output(&json, config.output.report.as_deref())?;
    // A configured series path alongside a sweep task gets the CSV too.
    if config.output.series.is_some() {
        if let Ok(csv) = emit(&report, EmitFormat::CsvSeries) {
            write_output(&csv, config.output.series.as_deref())?;
        }
    }
    Ok(())
}

fn sweep_g2(path: &Path) -> Result<(), Failure> {
    let mut config = load_config(path)?;
    config
        .tasks
        .retain(|task| matches!(task, TaskSpec::G2Sweep { .. }));
    if config.tasks.len() != 1 {
        return Err(Failure::config(format!(
            "{}: sweep-g2 requires exactly one g2-sweep task, found {}",
            path.display(),
            config.tasks.len()
        )));
    }
    let report = ncwitness::run::run(&config).map_err(|e| Failure::runtime(e.to_string()))?;
    let csv = emit(&report, EmitFormat::CsvSeries).map_err(|e| Failure::runtime(e.to_string()))?;
    write_output(&csv, config.output.series.as_deref())
}

fn validate(path: &Path) -> Result<(), Failure> {
    let config = load_config(path)?;
    println!(
        "{}: valid ({} task(s), {} provider point(s))",
        path.display(),
        config.tasks.len(),
        config.provider.point_count()
    );
    Ok(())
}
