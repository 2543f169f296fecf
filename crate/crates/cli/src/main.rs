//! `bmirelax` command-line tool.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use bmirelax::ConeKind;
use clap::{Args, Parser, Subcommand};

/// Exit status shared by all subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Optimal or verified.
    Success,
    /// Infeasible, unbounded or violated.
    Negative,
    /// Inconclusive, inaccurate or failed.
    Undecided,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Negative => 2,
            Outcome::Undecided => 3,
        }
    }

    /// The less favourable of two outcomes.
    pub fn worst(self, other: Outcome) -> Outcome {
        use Outcome::*;
        match (self, other) {
            (Undecided, _) | (_, Undecided) => Undecided,
            (Negative, _) | (_, Negative) => Negative,
            _ => Success,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bmirelax", version, about = "Convex relaxations and penalty methods for bilinear matrix inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Problem file (JSON).
    pub problem: PathBuf,
    /// Absolute and relative solver tolerance.
    #[arg(long, default_value_t = 1e-7)]
    pub eps: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iter: usize,
    /// Seed for randomized estimator restarts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reject unknown fields in input files.
    #[arg(long)]
    pub strict: bool,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args, Clone)]
pub struct PointArg {
    /// Reference point x̌, comma separated (defaults to the problem file's x_check, then the origin).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x_check: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one relaxation, optionally penalized.
    Relax {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = ConeKind::Sdp)]
        cone: ConeKind,
        /// Add the penalty η(tr X − 2x̌ᵀx + x̌ᵀx̌).
        #[arg(long)]
        penalty: bool,
        /// Penalty weight (defaults to max(1, ‖c‖₂)).
        #[arg(long, requires = "penalty")]
        eta: Option<f64>,
        #[command(flatten)]
        point: PointArg,
        /// Also write the assembled standard-form program to this path.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Penalized relaxation with η doubled until the solution is exact.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = ConeKind::Sdp)]
        cone: ConeKind,
        /// Starting weight (defaults to max(1, ‖c‖₂)).
        #[arg(long)]
        eta: Option<f64>,
        #[command(flatten)]
        point: PointArg,
    },
    /// Sequential penalized relaxations, each round re-centred at the last point.
    Sequential {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = ConeKind::Sdp)]
        cone: ConeKind,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 30)]
        rounds: usize,
        #[command(flatten)]
        point: PointArg,
    },
    /// Diagnose a given solution (solution file or report).
    Certify {
        #[command(flatten)]
        common: Common,
        /// Solution file or report produced by another subcommand.
        solution: PathBuf,
        /// Overrides the cone recorded in the solution.
        #[arg(long)]
        cone: Option<ConeKind>,
        #[command(flatten)]
        point: PointArg,
    },
    /// Brute-force grid over a box: feasible set, optimum, distance.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Grid spacing.
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,
        /// Half-width of the box around x̌.
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        #[command(flatten)]
        point: PointArg,
    },
    /// Lower bounds from all three relaxations.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Relax { common, cone, penalty, eta, point, dump } => commands::relax(&common, cone, penalty, eta, &point, dump.as_deref()),
        Command::Solve { common, cone, eta, point } => commands::solve(&common, cone, eta, &point),
        Command::Sequential { common, cone, eta, rounds, point } => commands::sequential(&common, cone, eta, rounds, &point),
        Command::Certify { common, solution, cone, point } => commands::certify(&common, &solution, cone, &point),
        Command::Oracle { common, resolution, radius, point } => commands::oracle(&common, resolution, radius, &point),
        Command::Bounds { common } => commands::bounds(&common),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::error_code(&e))
        }
    }
}
