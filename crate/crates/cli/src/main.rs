//! `semiphi` command-line front end.
//!
//! Exit codes: 0 when every verdict holds or the construction succeeded,
//! 1 when a property is refuted, 2 on unreadable or invalid input.

mod commands;
mod demo;
mod fixture;
mod render;

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use semiphi::problem::{ProblemFile, ReportFile};
use semiphi::{Error, Tolerance};

#[derive(Parser, Debug)]
#[command(name = "semiphi", version, about = "Completely semi-phi maps on finite-dimensional Hilbert modules")]
struct Cli {
    /// Uniform absolute and relative tolerance.
    #[arg(long, global = true, env = "SEMIPHI_TOL")]
    tol: Option<f64>,

    /// Emit the report as JSON.
    #[arg(long, global = true)]
    json: bool,

    /// Seed for randomized fixtures and demos.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Choi test of complete positivity for the problem's phi.
    CheckCp { input: PathBuf },
    /// Kraus operators and Stinespring dilation of phi.
    Stinespring { input: PathBuf },
    /// Is the map a phi-map on its domain?
    CheckPhi { input: PathBuf },
    /// Is the map completely semi-phi?
    CheckSemiphi { input: PathBuf },
    /// A violating family for the semi-phi inequality, if there is one.
    Witness { input: PathBuf },
    /// Size of phi(<F-perp, E>).
    Obstruction { input: PathBuf },
    /// Extend a completely semi-phi map from F to E.
    Extend { input: PathBuf },
    /// Compare a given phi-map on E with the engine's extension.
    Compare { input: PathBuf },
    /// Block map on the operator system of the domain: CP and corner checks.
    Paulsen { input: PathBuf },
    /// Run one of the worked examples end to end.
    Demo {
        name: DemoName,
        /// Size parameter, 1 to 6.
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
    /// Write a problem file for a built-in fixture to stdout.
    Fixture {
        name: FixtureName,
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum DemoName {
    #[value(name = "example-2-1")]
    Example21,
    #[value(name = "example-3-4")]
    Example34,
    #[value(name = "example-3-9")]
    Example39,
    #[value(name = "compacts-2-6")]
    Compacts26,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FixtureName {
    /// Extension problem `Φ([T; 0]) = T` on `{[T; S]}` over `M_n`.
    #[value(name = "example-2-1")]
    Example21,
    /// Extension problem over `M_n ⊕ M_n` with phi killing the second block.
    SplitBlocks,
    /// The transpose map on `M_n`.
    Transpose,
    /// Pair `Φ(x) = n x`, `φ = id` on `C`.
    Scalar,
    /// Random extension problem with a semi-phi input.
    RandomExtension,
    /// Random pair, semi-phi or not.
    RandomPair,
}

pub const MAX_N: usize = 6;

/// A failed run: exit code 2 for input problems, 1 for refusals. Refusals
/// still carry a report.
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub report: Option<Box<ReportFile>>,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
            report: None,
        }
    }
}

/// Library errors that answer the mathematical question in the negative.
fn is_refusal(err: &Error) -> bool {
    matches!(
        err,
        Error::NotCompletelyPositive(_)
            | Error::NotSemiPhi(_)
            | Error::NotContractive(_)
            | Error::ObstructionNonzero(_)
            | Error::Certification(_)
    )
}

/// Margin attached to the failed verdict of a refusal.
fn refusal_margin(err: &Error) -> f64 {
    match err {
        Error::NotCompletelyPositive(m) | Error::NotSemiPhi(m) => *m,
        Error::ObstructionNonzero(n) => -n,
        Error::NotContractive(n) => 1.0 - n,
        _ => 0.0,
    }
}

pub type Outcome = Result<ReportFile, Failure>;

/// Converts a library error raised while running `command`.
pub fn fail(command: &str, err: Error) -> Failure {
    if is_refusal(&err) {
        let mut report = ReportFile::new(command);
        report.verdict("succeeded", false, refusal_margin(&err));
        report.note(err.to_string());
        Failure {
            code: 1,
            message: err.to_string(),
            report: Some(Box::new(report)),
        }
    } else {
        Failure::input(err.to_string())
    }
}

fn read_problem(path: &PathBuf) -> Result<ProblemFile, Failure> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::input(format!("stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
    };
    ProblemFile::parse(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn base_tolerance(tol: Option<f64>) -> Result<Tolerance, Failure> {
    match tol {
        Some(t) => Tolerance::uniform(t).map_err(|e| Failure::input(format!("--tol: {e}"))),
        None => Ok(Tolerance::default()),
    }
}

fn check_n(n: usize) -> Result<(), Failure> {
    if (1..=MAX_N).contains(&n) {
        Ok(())
    } else {
        Err(Failure::input(format!("--n must be between 1 and {MAX_N}, got {n}")))
    }
}

fn run(cli: &Cli) -> Outcome {
    let base = base_tolerance(cli.tol)?;
    let with_problem = |input: &PathBuf, f: fn(&ProblemFile, &Tolerance) -> Outcome| {
        let problem = read_problem(input)?;
        let tol = problem
            .tolerance(base)
            .map_err(|e| Failure::input(format!("tolerance: {e}")))?;
        problem
            .problem
            .validate(&tol)
            .map_err(|e| Failure::input(e.to_string()))?;
        f(&problem, &tol)
    };
    match &cli.command {
        Command::CheckCp { input } => with_problem(input, commands::check_cp),
        Command::Stinespring { input } => with_problem(input, commands::stinespring),
        Command::CheckPhi { input } => with_problem(input, commands::check_phi),
        Command::CheckSemiphi { input } => with_problem(input, commands::check_semiphi),
        Command::Witness { input } => with_problem(input, commands::witness),
        Command::Obstruction { input } => with_problem(input, commands::obstruction),
        Command::Extend { input } => with_problem(input, commands::extend),
        Command::Compare { input } => with_problem(input, commands::compare),
        Command::Paulsen { input } => with_problem(input, commands::paulsen),
        Command::Demo { name, n } => {
            check_n(*n)?;
            demo::run(*name, *n, cli.seed, &base)
        }
        Command::Fixture { .. } => unreachable!("handled before dispatch"),
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Fixture { name, n } = &cli.command {
        return match check_n(*n).and_then(|_| {
            base_tolerance(cli.tol).and_then(|tol| fixture::build(*name, *n, cli.seed, &tol))
        }) {
            Ok(file) => {
                emit(&file.to_json());
                ExitCode::SUCCESS
            }
            Err(f) => {
                eprintln!("error: {}", f.message);
                ExitCode::from(f.code)
            }
        };
    }

    let start = Instant::now();
    let outcome = run(&cli);
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let (code, report, error) = match outcome {
        Ok(report) => (if report.all_hold() { 0 } else { 1 }, Some(report), None),
        Err(f) => (f.code, f.report.map(|r| *r), Some(f.message)),
    };
    if let Some(mut report) = report {
        report.timings_ms.insert("total".into(), elapsed);
        if cli.json {
            emit(&report.to_json());
        } else {
            emit(render::summary(&report).trim_end());
        }
    }
    if let Some(message) = error {
        eprintln!("error: {message}");
    }
    ExitCode::from(code)
}
