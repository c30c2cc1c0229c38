//! `kamlin`: normal forms, linearization runs, schedules and stability
//! verdicts for periodically forced elliptic equilibria.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CoefficientSource, KamRunArgs, Outcome, ScheduleArgs, EXIT_INPUT};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Parser)]
#[command(name = "kamlin", version, about = "Linearization and stability of periodically forced elliptic equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normal form coefficients A_{2j} up to a given order.
    Normalize {
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        order: u32,
        /// Summary JSON path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical linearization run; per-step CSV goes next to the JSON.
    KamRun {
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        #[arg(long, default_value_t = 3)]
        s0: u32,
        #[arg(long = "rho-inf", default_value_t = 0.25)]
        rho_inf: f64,
        #[arg(long = "gamma-inf", default_value_t = 0.25)]
        gamma_inf: f64,
        /// Largest degree in sqrt(r) kept during the run.
        #[arg(long, default_value_t = 24)]
        window: u32,
        /// Range 1 <= k <= K for the Diophantine estimate.
        #[arg(long = "K", default_value_t = 1000)]
        k_max: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds and checks the step parameters of the infinite iteration.
    Schedule {
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
        /// Use this c1 instead of computing it from alpha.
        #[arg(long, conflicts_with = "alpha")]
        c1: Option<f64>,
        /// Diophantine constant for c1; estimated for --omega when omitted.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = GOLDEN)]
        omega: f64,
        #[arg(long = "K", default_value_t = 1000)]
        k_max: u64,
        #[arg(long, conflicts_with = "find_min_q", required_unless_present = "find_min_q")]
        q: Option<u32>,
        #[arg(long = "find-min-q")]
        find_min_q: bool,
        #[arg(long, default_value_t = 40)]
        horizon: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continued fraction and finite-range Diophantine constants of omega.
    Diophantine {
        #[arg(long)]
        omega: f64,
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
        #[arg(long = "K", default_value_t = 10_000)]
        k_max: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stability verdict from the normal form and the Diophantine scan.
    Verdict {
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        order: u32,
        #[arg(long = "K", default_value_t = 1000)]
        k_max: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(command: Command) -> (Result<Outcome, commands::Failure>, Option<PathBuf>) {
    match command {
        Command::Normalize { input, order, out } => (commands::normalize(&input, order), out),
        Command::KamRun { input, steps, s0, rho_inf, gamma_inf, window, k_max, out } => {
            let args = KamRunArgs { steps, s0, rho_inf, gamma_inf, window, k_max };
            (commands::kam_run_cmd(&input, &args), out)
        }
        Command::Schedule { tau, c1, alpha, omega, k_max, q, find_min_q, horizon, out } => {
            let c1 = match c1 {
                Some(c1) => CoefficientSource::Given(c1),
                None => CoefficientSource::Computed { alpha, omega, k_max },
            };
            let args = ScheduleArgs { tau, c1, q, find_min_q, horizon };
            (commands::schedule_cmd(&args), out)
        }
        Command::Diophantine { omega, tau, k_max, out } => (commands::diophantine_cmd(omega, tau, k_max), out),
        Command::Verdict { input, order, k_max, out } => (commands::verdict_cmd(&input, order, k_max), out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out) = run(cli.command);
    match result {
        Ok(outcome) => match report::write_outputs(out.as_deref(), &outcome.summary, outcome.csv.as_deref()) {
            Ok(()) => ExitCode::from(outcome.code),
            Err(e) => {
                eprintln!("error: cannot write report: {e}");
                ExitCode::from(EXIT_INPUT)
            }
        },
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
