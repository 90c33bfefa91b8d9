//! `feq` — numerically solve and certify functional equations
//! `f(F(x, y)) = H[f(x), f(y), x, y]` on an interval with boundary data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use feq_cli::commands::{self, CommonOpts};

#[derive(Parser)]
#[command(
    name = "feq",
    version,
    about = "Solve f(F(x,y)) = H[f(x),f(y),x,y] on [a,b] from boundary data, \
             certify orbit density, and detect overdetermined instances"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid-verify the solvability hypotheses of a problem file
    Check {
        path: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Solve the equation; writes <name>-solution.csv and <name>-report.json
    Solve {
        path: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Measure equation residuals of a candidate solution
    Verify {
        path: PathBuf,
        /// CSV solution (header `z,f`) to verify
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Closed-form candidate over `z`, e.g. "2 + 3*z"
        #[arg(long)]
        closed_form: Option<String>,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Expand the orbit of a seed; writes <name>-orbit.csv and <name>-density.json
    Orbit {
        path: PathBuf,
        /// Seed point in [a, b]
        #[arg(long)]
        seed: f64,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let result = match &cli.command {
        Command::Check { path, opts } => commands::cmd_check(path, opts),
        Command::Solve { path, opts } => commands::cmd_solve(path, opts),
        Command::Verify {
            path,
            solution,
            closed_form,
            opts,
        } => commands::cmd_verify(path, solution.as_deref(), closed_form.as_deref(), opts),
        Command::Orbit { path, seed, opts } => commands::cmd_orbit(path, *seed, opts),
    };

    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
