//! `lda`: runs simulations, integrates the differential equations and
//! reproduces the published constants and tables.
//!
//! Every subcommand writes its artifacts and a `manifest.json` into the
//! output directory. Failures print one JSON object on stderr and exit with
//! 2 (validation), 3 (domain or integration) or 4 (I/O).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lda_core::algorithms::Objective;
use lda_core::harness::{Backend, Mode};

#[derive(Parser, Debug)]
#[command(name = "lda", version, about = "Local deletion algorithms on random regular graphs")]
struct Cli {
    /// Directory for artifacts and the manifest.
    #[arg(long, global = true, default_value = "lda-out")]
    out: PathBuf,
    /// Worker threads for trials.
    #[arg(long, global = true, env = "LDA_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate an algorithm on random regular graphs.
    Simulate(SimulateArgs),
    /// Integrate a differential equation system.
    Ode(OdeArgs),
    /// Reproduce the published constants.
    Constants(ConstantsArgs),
    /// Compare the generic transition field with a hand-coded one.
    DeriveCheck(DeriveCheckArgs),
    /// Girth and short-cycle census of a graph file.
    Girth(GirthArgs),
    /// Compare per-type expectations on two fixed graphs.
    Compare(CompareArgs),
    /// Reproduce a results table.
    Table(TableArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[arg(long = "alg")]
    pub algorithm: String,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub r: u32,
    /// Exploration cap of the path rules.
    #[arg(long, default_value_t = lda_core::algorithms::DEFAULT_PATH_CAP)]
    pub d: u32,
    #[arg(long, value_parser = parse_objective, default_value = "min")]
    pub objective: Objective,
    #[arg(long, value_parser = parse_mode, default_value = "prioritised")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, value_parser = parse_backend, default_value = "pairing")]
    pub backend: Backend,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Trajectory sampling interval in steps.
    #[arg(long, default_value_t = 1000)]
    pub record_every: u64,
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Count pre-clashes (slower).
    #[arg(long)]
    pub preclashes: bool,
}

#[derive(Args, Debug, Clone)]
pub struct OdeArgs {
    /// cut, cubic_is, cubic_is_improved, or the fluid limit of
    /// min_degree_is, min_degree_dom or dz_is.
    #[arg(long)]
    pub system: String,
    #[arg(long)]
    pub h: Option<f64>,
    /// Degree for fluid limits.
    #[arg(long, default_value_t = 3)]
    pub r: u32,
    #[arg(long, default_value_t = 10.0)]
    pub x_max: f64,
}

#[derive(Args, Debug, Clone)]
pub struct ConstantsArgs {
    /// Also compute the Table 1 fluid limits for r = 3, 4.
    #[arg(long)]
    pub with_tables: bool,
}

#[derive(Args, Debug, Clone)]
pub struct DeriveCheckArgs {
    #[arg(long = "alg")]
    pub algorithm: String,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Exploration cap (defaults: 30 for cubic_is_path, 12 for the improved rule).
    #[arg(long)]
    pub d: Option<u32>,
}

#[derive(Args, Debug, Clone)]
pub struct GirthArgs {
    /// Edge list (`n m` then `u v` lines) or LCF code (`[a,b,...]^k`).
    pub file: PathBuf,
    /// Census up to this cycle length (default: girth + 2).
    #[arg(long)]
    pub max_len: Option<u32>,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    #[arg(long = "alg")]
    pub algorithm: String,
    /// Two catalogue names or graph files, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub graphs: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub steps: u64,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct TableArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub which: u8,
    /// Degrees to include (default: 3..=7 for Table 1, 3..=6 for Table 2).
    #[arg(long, value_delimiter = ',')]
    pub rs: Option<Vec<u32>>,
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Skip the simulation column.
    #[arg(long)]
    pub no_sim: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: lda_core::harness::HarnessError| e.to_string())
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse().map_err(|e: lda_core::harness::HarnessError| e.to_string())
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    match s {
        "min" => Ok(Objective::Min),
        "max" => Ok(Objective::Max),
        other => Err(format!("unknown objective {other:?}")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            return report(&commands::CliError::Usage(err.to_string()));
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            return report(&commands::CliError::Usage(e.to_string()));
        }
    }
    let ctx = commands::Context { out: cli.out, argv: std::env::args().collect() };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&ctx, &a),
        Command::Ode(a) => commands::ode(&ctx, &a),
        Command::Constants(a) => commands::constants(&ctx, &a),
        Command::DeriveCheck(a) => commands::derive_check(&ctx, &a),
        Command::Girth(a) => commands::girth_cmd(&ctx, &a),
        Command::Compare(a) => commands::compare(&ctx, &a),
        Command::Table(a) => commands::table(&ctx, &a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &commands::CliError) -> ExitCode {
    let code = e.exit_code();
    eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string(), "exit_code": code }));
    ExitCode::from(code)
}
