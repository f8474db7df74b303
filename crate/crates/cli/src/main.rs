mod config;
mod run;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{resolve, CommonArgs, Mode};

/// Street-grid charging model: analytic curves, Monte-Carlo estimates, and
/// consistency checks.
///
/// Exit status: 0 on success; 1 when a comparison row failed its tolerance
/// or an oracle-check trial aborted; 2 on usage, config, or I/O errors.
#[derive(Parser)]
#[command(name = "chargegrid", version, about, verbatim_doc_comment)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integral-form P(D_n < x) on the threshold grid, with per-event terms
    Analytic(CommonArgs),
    /// Monte-Carlo estimate of P(D_n < x) on the threshold grid
    Mc(CommonArgs),
    /// Analytic vs Monte-Carlo on the same grid; rows gain abs_diff and pass
    Compare(CommonArgs),
    /// Charging-usage probability vs total trip distance
    #[command(name = "sweep-tc")]
    SweepTc(CommonArgs),
    /// Routing decision tree vs exact route search on sampled grids
    #[command(name = "oracle-check")]
    OracleCheck(CommonArgs),
    /// Conditional gap-law CDFs vs their rejection samplers
    #[command(name = "x1x2-check")]
    X1x2Check(CommonArgs),
}

impl Command {
    fn mode_and_args(&self) -> (Mode, &CommonArgs) {
        match self {
            Command::Analytic(a) => (Mode::Analytic, a),
            Command::Mc(a) => (Mode::Mc, a),
            Command::Compare(a) => (Mode::Compare, a),
            Command::SweepTc(a) => (Mode::SweepTc, a),
            Command::OracleCheck(a) => (Mode::OracleCheck, a),
            Command::X1x2Check(a) => (Mode::X1x2Check, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = cli.command.mode_and_args();
    let outcome = resolve(mode, args).and_then(|config| run::run(&config));
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
