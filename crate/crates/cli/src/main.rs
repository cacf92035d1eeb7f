mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wmp_core::rational::parse_rational;
use wmp_core::{Mode, Objective, ParseError, Rational, SolverError};

/// Window mean-payoff synthesis on MDPs.
#[derive(Debug, Parser)]
#[command(name = "wmp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Maximal end component decomposition.
    Mec {
        #[arg(long)]
        model: PathBuf,
    },
    /// Sure values per vertex, or almost-sure values per end component.
    Values {
        #[arg(long, value_enum)]
        kind: Kind,
        #[command(flatten)]
        objective: ObjectiveArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Decide a BWC, BP or BAS query and optionally write a witness strategy.
    Solve(SolveArgs),
    /// Monte Carlo estimate of a strategy's window value.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Sure,
    AlmostSure,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjKind {
    Fwmp,
    Bwmp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Bwc,
    Bp,
    Bas,
}

#[derive(Debug, Args)]
struct ObjectiveArgs {
    #[arg(long, value_enum)]
    obj: ObjKind,
    /// Window length, required for fwmp.
    #[arg(long)]
    window: Option<usize>,
}

impl ObjectiveArgs {
    fn objective(&self) -> Result<Objective, InvalidInput> {
        match (self.obj, self.window) {
            (ObjKind::Fwmp, Some(l)) if l >= 1 => Ok(Objective::Fwmp(l)),
            (ObjKind::Fwmp, _) => Err(InvalidInput("fwmp needs --window of at least 1".into())),
            (ObjKind::Bwmp, _) => Ok(Objective::Bwmp),
        }
    }
}

fn rational(text: &str) -> Result<Rational, String> {
    parse_rational(text).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long, value_parser = rational, allow_hyphen_values = true)]
    alpha: Rational,
    #[arg(long, value_parser = rational, allow_hyphen_values = true)]
    beta: Rational,
    /// Guarantee probability, required for bp.
    #[arg(long, value_parser = rational)]
    prob: Option<Rational>,
    /// Allowed loss in expectation of the BWC witness.
    #[arg(long, value_parser = rational, default_value = "1/100")]
    epsilon: Rational,
    #[arg(long = "from")]
    start: String,
    #[arg(long)]
    model: PathBuf,
    /// Write the witness strategy here when the answer is yes.
    #[arg(long)]
    strategy: Option<PathBuf>,
    /// Write the BP linear program here.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

impl SolveArgs {
    fn mode(&self) -> Mode {
        match self.mode {
            ModeArg::Bwc => Mode::Bwc,
            ModeArg::Bp => Mode::Bp,
            ModeArg::Bas => Mode::Bas,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    strategy: PathBuf,
    #[arg(long = "from")]
    start: String,
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    #[arg(long, default_value_t = 200)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = rational, allow_hyphen_values = true)]
    threshold: Rational,
    /// Window length; without it a range of windows is reported.
    #[arg(long)]
    window: Option<usize>,
    /// Defaults to a quarter of the horizon.
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

/// Bad arguments or files, reported with exit code 3.
#[derive(Debug)]
struct InvalidInput(String);

impl std::fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidInput {}

fn is_invalid_input(e: &anyhow::Error) -> bool {
    if e.is::<InvalidInput>() || e.is::<ParseError>() || e.is::<std::io::Error>() {
        return true;
    }
    matches!(
        e.downcast_ref::<SolverError>(),
        Some(SolverError::UnknownVertex(_) | SolverError::Precondition(_) | SolverError::Strategy(_))
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out).expect("JSON values serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_invalid_input(&e) { 3 } else { 1 })
        }
    }
}
