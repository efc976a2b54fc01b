//! `matchgate-sim`: strong and weak simulation of matchgate circuit files.
//!
//! Exit status is 0 on success, 1 on a numerical integrity failure and 2 on
//! invalid input. `MATCHGATE_SIM_THREADS` caps the worker threads.

mod args;
mod commands;
mod report;

use clap::{Args, Parser, Subcommand};
use commands::{CliError, Fields, Loaded, Query};
use report::{Format, Report};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "matchgate-sim", version, about = "Simulate nearest-neighbour matchgate circuits")]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, default_value = "text", global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct QueryArgs {
    /// Partial outcome, e.g. `1=0,3=1`.
    #[arg(long, conflicts_with = "all_over")]
    outcome: Option<String>,
    /// Qubits whose full outcome table is printed, e.g. `1,2,3`.
    #[arg(long)]
    all_over: Option<String>,
    /// Observed adaptive rounds, e.g. `01,1`.
    #[arg(long)]
    trace: Option<String>,
    /// Replaces the file's measure block, e.g. `2,3@1.57:0`.
    #[arg(long)]
    measure: Option<String>,
}

impl From<QueryArgs> for Query {
    fn from(a: QueryArgs) -> Self {
        Query {
            outcome: a.outcome,
            all_over: a.all_over,
            trace: a.trace,
            measure: a.measure,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a circuit file.
    Validate { file: PathBuf },
    /// Exact marginal probabilities.
    Prob {
        file: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
    },
    /// `<Z_k>` of one qubit.
    Expect {
        file: PathBuf,
        #[arg(long)]
        qubit: usize,
    },
    /// Draw measurement outcomes.
    Sample {
        file: PathBuf,
        #[arg(long, default_value_t = 1000)]
        shots: usize,
        /// Generated and printed when absent.
        #[arg(long)]
        seed: Option<u64>,
        /// Replaces the file's measure block, e.g. `1,2@1.57:0`.
        #[arg(long)]
        measure: Option<String>,
        /// Also print every shot.
        #[arg(long)]
        list: bool,
    },
    /// Dense state-vector reference for small circuits.
    Oracle {
        file: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        qubit: Option<usize>,
        /// Also run the fast path and print the largest deviation.
        #[arg(long)]
        compare: bool,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("MATCHGATE_SIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("MATCHGATE_SIM_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))
}

fn run(command: Command) -> Result<(Loaded, Fields, Option<u64>), CliError> {
    configure_threads()?;
    Ok(match command {
        Command::Validate { file } => {
            let l = commands::load(&file)?;
            let f = commands::validate(&l);
            (l, f, None)
        }
        Command::Prob { file, query } => {
            let l = commands::load(&file)?;
            let f = commands::prob(&l, &query.into())?;
            (l, f, None)
        }
        Command::Expect { file, qubit } => {
            let l = commands::load(&file)?;
            let f = commands::expect(&l, qubit)?;
            (l, f, None)
        }
        Command::Sample {
            file,
            shots,
            seed,
            measure,
            list,
        } => {
            let l = commands::load(&file)?;
            let seed = seed.unwrap_or_else(|| {
                let s = rand::random::<u64>();
                eprintln!("seed: {s} (generated)");
                s
            });
            let f = commands::sample_cmd(&l, measure.as_deref(), shots, seed, list)?;
            (l, f, Some(seed))
        }
        Command::Oracle {
            file,
            query,
            qubit,
            compare,
        } => {
            let l = commands::load(&file)?;
            let f = commands::oracle(&l, &query.into(), qubit, compare)?;
            (l, f, None)
        }
    })
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let start = Instant::now();
    match run(cli.command) {
        Ok((loaded, results, seed)) => {
            let report = Report {
                command: argv,
                digest: loaded.digest,
                seed,
                elapsed: start.elapsed(),
                results,
            };
            match cli.format {
                Format::Text => {
                    emit(&report.text());
                    eprintln!("time: {:.3} ms", report.elapsed.as_secs_f64() * 1e3);
                }
                Format::Machine => emit(&format!("{}\n", report.machine())),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.exit_code();
            match cli.format {
                Format::Text => eprintln!("error ({}): {e}", e.kind()),
                Format::Machine => emit(&format!(
                    "{}\n",
                    serde_json::json!({ "error": e.to_string(), "kind": e.kind(), "exit_code": code })
                )),
            }
            ExitCode::from(code as u8)
        }
    }
}
