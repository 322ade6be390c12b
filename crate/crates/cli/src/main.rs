use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use qrelent_cli::experiments::{planned_rows, provenance};
use qrelent_cli::{run, CsvStream, Experiment, RunError, RunOptions};

const EXIT_SOLVER: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;
const EXIT_INTERRUPTED: u8 = 130;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Reproduce capacity curves, REE timings and recovery counterexamples as
/// data files.
#[derive(Debug, Parser)]
#[command(name = "qrelent", version)]
struct Args {
    #[arg(long, value_enum)]
    experiment: Experiment,
    /// Output directory; the report is written to `<out>/<experiment>.<format>`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Gauss-Legendre nodes.
    #[arg(long, default_value_t = qrelent::quadrature::DEFAULT_M)]
    m: usize,
    /// Square-root levels.
    #[arg(long, default_value_t = qrelent::quadrature::DEFAULT_K)]
    k: usize,
    /// Sweep points (ea-sweep, q-sweep, recovery-theta).
    #[arg(long)]
    grid: Option<usize>,
    /// Samples (accuracy-cq, recovery-scatter) or ladder sizes (ree-bench).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = qrelent::conic::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        if let Err(e) = ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst)) {
            eprintln!("warning: no interrupt handler: {e}");
        }
    }
    match execute(&args, &stop) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("interrupted; partial report written");
            ExitCode::from(EXIT_INTERRUPTED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() {
                EXIT_USAGE
            } else if e.is_solver_failure() {
                EXIT_SOLVER
            } else {
                EXIT_IO
            })
        }
    }
}

/// Returns `Ok(false)` when interrupted.
fn execute(args: &Args, stop: &AtomicBool) -> Result<bool, RunError> {
    let opts = RunOptions {
        seed: args.seed,
        m: args.m,
        k: args.k,
        grid: args.grid,
        count: args.count,
        tol: args.tol,
    };
    let rows = planned_rows(args.experiment, &opts)?;
    std::fs::create_dir_all(&args.out)?;
    let id = args.experiment.id();
    match args.format {
        Format::Csv => {
            let file = BufWriter::new(File::create(args.out.join(format!("{id}.csv")))?);
            let columns: Vec<String> = args
                .experiment
                .columns()
                .iter()
                .map(|c| c.to_string())
                .collect();
            let mut stream = CsvStream::start(
                file,
                &provenance(args.experiment, &opts, rows),
                &columns,
                rows,
            )?;
            let result = run(args.experiment, &opts, stop, |row| stream.push(row));
            let truncation = match &result {
                Ok(r) => r.truncated.then_some("interrupted"),
                Err(_) => Some("failed"),
            };
            stream.finish(truncation)?;
            Ok(!result?.truncated)
        }
        Format::Json => {
            let report = run(args.experiment, &opts, stop, |_| Ok(()))?;
            let file = BufWriter::new(File::create(args.out.join(format!("{id}.json")))?);
            report.write_json(file)?;
            Ok(!report.truncated)
        }
    }
}
