mod commands;
mod error;
mod run;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hbvm::hamiltonian::Problem;
use hbvm::integrator::{EnergyMeasure, ErrorMeasure};
use hbvm::nlsolve::SolverKind;

use crate::run::MethodKind;

/// HBVM(k,s) and Gauss-Legendre integrators with a triangular-splitting
/// stage solver.
#[derive(Debug, Parser)]
#[command(name = "hbvm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the Butcher tableau A, b, c and the matrix X̂_s as CSV.
    Tableau {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: usize,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the auxiliary abscissae, d_s, the factors L and U and the
    /// condition residuals as CSV.
    Splitting {
        #[arg(long)]
        s: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Amplification factors of the splitting iteration.
    Analyze {
        /// Comma-separated stage counts, 2..=6.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 3, 4, 5, 6])]
        s: Vec<usize>,
        /// Comma-separated inner-iteration counts for the averaged factors.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3])]
        mu: Vec<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one problem and report a stats row.
    Integrate(IntegrateArgs),
    /// Run every configuration of a sweep spec file.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Maximum number of runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Debug, Args)]
struct IntegrateArgs {
    /// charged-particle, fpu or harmonic.
    #[arg(long)]
    problem: Problem,
    /// hbvm or composition6.
    #[arg(long, default_value = "hbvm")]
    method: MethodKind,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long)]
    h: f64,
    #[arg(long = "t-end")]
    t_end: f64,
    /// fixed-point, newton or splitting.
    #[arg(long, default_value = "splitting")]
    solver: SolverKind,
    #[arg(long, default_value_t = 2)]
    mu: usize,
    #[arg(long, default_value_t = 1e-13)]
    tol: f64,
    #[arg(long = "max-outer", default_value_t = 100)]
    max_outer: usize,
    /// Keep every N-th state in the trajectory CSV.
    #[arg(long, default_value_t = 1)]
    every: usize,
    /// Compare against an HBVM(10,5) reference on the same grid.
    #[arg(long = "solution-error")]
    solution_error: bool,
    /// max-relative or final-absolute.
    #[arg(long = "error-measure", default_value = "max-relative")]
    error_measure: ErrorMeasure,
    /// absolute or relative.
    #[arg(long = "ham-error", default_value = "absolute")]
    ham_error: EnergyMeasure,
    /// Trajectory CSV (not written when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stats CSV (stdout when omitted).
    #[arg(long)]
    stats: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Tableau { k, s, out } => commands::tableau(k, s, out.as_deref()),
        Command::Splitting { s, out } => commands::splitting(s, out.as_deref()),
        Command::Analyze { s, mu, out } => commands::analyze(&s, &mu, out.as_deref()),
        Command::Integrate(args) => commands::integrate(&args.to_spec(), args.out.as_deref(), args.stats.as_deref()),
        Command::Sweep { spec, out, jobs } => commands::sweep(&spec, out.as_deref(), jobs),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hbvm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

impl IntegrateArgs {
    fn to_spec(&self) -> run::RunSpec {
        run::RunSpec {
            problem: self.problem,
            method: self.method,
            k: self.k,
            s: self.s,
            h: self.h,
            t_end: self.t_end,
            options: hbvm::nlsolve::SolveOptions {
                tol: self.tol,
                max_outer: self.max_outer,
                mu: self.mu,
                solver: self.solver,
            },
            every: self.every,
            solution_error: self.solution_error,
            error_measure: self.error_measure,
            energy: self.ham_error,
        }
    }
}
