use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relayflow_core::simkit::{emit_csv, gnuplot_script, read_csv, run_experiment, Experiment};
use relayflow_core::verify::run_quick_checks;
use relayflow_core::Error;

/// Outage experiments for half-duplex Gaussian relay networks.
#[derive(Debug, Parser)]
#[command(name = "relayflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo outage experiment and write the curves as CSV.
    Run {
        /// Experiment file (TOML, or JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (overrides the file).
        #[arg(long)]
        workers: Option<usize>,
        /// Master seed (overrides the file).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Turn a results CSV into a gnuplot script.
    Curves {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        gnuplot: PathBuf,
    },
    /// Run the built-in oracle and property checks.
    Verify,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            out,
            workers,
            seed,
        } => run(&config, &out, workers, seed),
        Command::Curves { input, gnuplot } => curves(&input, &gnuplot),
        Command::Verify => return verify(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("relayflow: {e}");
            ExitCode::from(code)
        }
    }
}

type Outcome = Result<(), (u8, Error)>;

fn config_error(e: Error) -> (u8, Error) {
    (EXIT_CONFIG, e)
}

fn run_exit_code(e: &Error) -> u8 {
    match e {
        Error::FailureBudget { .. } => EXIT_BUDGET,
        Error::Config(_) | Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn run(config: &Path, out: &Path, workers: Option<usize>, seed: Option<u64>) -> Outcome {
    let mut exp = Experiment::load(config).map_err(config_error)?;
    if let Some(w) = workers {
        if w == 0 {
            return Err(config_error(Error::Config("--workers must be at least 1".into())));
        }
        exp.workers = Some(w);
    }
    if let Some(s) = seed {
        exp.seed = s;
    }
    let report = run_experiment(&exp).map_err(|e| (run_exit_code(&e), e))?;
    emit_csv(&report.curves, out).map_err(|e| (EXIT_FAILURE, e))?;
    eprintln!(
        "{} curves, {} trials, {} flagged; wrote {}",
        report.curves.len(),
        report.trials,
        report.flagged_trials,
        out.display()
    );
    if let Some(first) = report.first_failure {
        eprintln!("first solver failure: {first}");
    }
    Ok(())
}

fn curves(input: &Path, gnuplot: &Path) -> Outcome {
    let curves = read_csv(input).map_err(|e| match e {
        Error::Parse { .. } => (EXIT_CONFIG, e),
        e => (EXIT_FAILURE, e),
    })?;
    let image = gnuplot.with_extension("png");
    let script = gnuplot_script(&curves, &image.to_string_lossy());
    std::fs::write(gnuplot, script).map_err(|source| {
        (
            EXIT_FAILURE,
            Error::Io {
                path: gnuplot.to_path_buf(),
                source,
            },
        )
    })?;
    eprintln!("{} curves; wrote {}", curves.len(), gnuplot.display());
    Ok(())
}

fn verify() -> ExitCode {
    let checks = run_quick_checks();
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    println!("{} checks, {} failed", checks.len(), failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}
