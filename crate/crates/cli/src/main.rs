//! `dacl`: validate contracts, evaluate them, and check the results.
//!
//! Standard output always carries one JSON document or a JSONL stream, except
//! for `render`, whose whole job is text. Exit status is 0 on success, 1 when
//! a report holds findings, and 2 for usage or I/O problems.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use dacl_core::decimal::{Decimal, RoundingMode};

#[derive(Debug, Parser)]
#[command(name = "dacl", version, about = "Deterministic evaluation of typed contract clauses")]
struct Cli {
    /// Rounding for formulas that do not name one.
    #[arg(long, global = true, env = "DACL_ROUNDING", value_parser = parse_rounding)]
    rounding: Option<RoundingMode>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the validation report for a contract.
    Validate { contract: PathBuf },
    /// Evaluate clauses for one set of facts.
    Evaluate(EvaluateArgs),
    /// Evaluate every event in a JSONL file.
    Batch(BatchArgs),
    /// Generate events that reach every declared state.
    GenEvents(GenArgs),
    /// Report which decision states a directory of traces reaches.
    Coverage { contract: PathBuf, traces_dir: PathBuf },
    /// Print a saved trace as text.
    Render { trace: PathBuf },
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    contract: PathBuf,
    /// Clause names, comma separated.
    #[arg(long, required = true, value_delimiter = ',')]
    clauses: Vec<String>,
    /// Facts as key=value, comma separated or repeated. Values stay strings
    /// until the engine coerces them.
    #[arg(long, value_delimiter = ',', value_parser = parse_fact)]
    facts: Vec<(String, String)>,
    /// A JSON object of facts. `--facts` entries override it.
    #[arg(long)]
    facts_file: Option<PathBuf>,
    /// Evaluation date, YYYY-MM-DD.
    #[arg(long)]
    date: NaiveDate,
    /// Write the audit trail here, even when evaluation fails.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also print the trail as text on standard error.
    #[arg(long)]
    render: bool,
    /// Accept facts the contract does not declare, with a warning.
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Args)]
struct BatchArgs {
    contract: PathBuf,
    events: PathBuf,
    /// Write per-event lines here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare outputs with each event's expected values.
    #[arg(long)]
    concordance: bool,
    /// Largest allowed difference between decimal outputs.
    #[arg(long, default_value = "0")]
    tolerance: Decimal,
    /// Worker threads; 0 means one per processor.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Write each event's trail to `<dir>/<event_id>.json`.
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Args)]
struct GenArgs {
    contract: PathBuf,
    /// Defaults to `<contract_id>.manifest.json` beside the contract.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Events per state on top of the two boundary events per bracket.
    #[arg(long, default_value_t = 1)]
    count_per_state: usize,
    /// Fill in expected values from the named reference oracle.
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_rounding(s: &str) -> Result<RoundingMode, String> {
    s.parse()
}

fn parse_fact(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    if k.trim().is_empty() {
        return Err(format!("empty fact name in '{s}'"));
    }
    Ok((k.trim().to_string(), v.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let options = commands::options(cli.rounding);
    let status = match cli.command {
        Command::Validate { contract } => commands::validate(&contract),
        Command::Evaluate(a) => commands::evaluate(a, options),
        Command::Batch(a) => commands::batch(a, options),
        Command::GenEvents(a) => commands::gen_events(a),
        Command::Coverage { contract, traces_dir } => commands::coverage(&contract, &traces_dir),
        Command::Render { trace } => commands::render(&trace),
    };
    match status {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("dacl: {e}");
            ExitCode::from(2)
        }
    }
}
