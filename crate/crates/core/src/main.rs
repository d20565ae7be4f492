use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use t2calc::scenario::{builtin, catalog, check_object, run_scenario, RunOptions, Scenario, SuiteSelection};
use t2calc::{Error, VerificationReport};

/// Default absolute tolerance when `--tol` is not given.
const TOL_ENV: &str = "T2CALC_TOL";

#[derive(Parser)]
#[command(name = "t2calc", version, about = "Symbolic-numeric verifier for second-order tangent bundle geometry")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Connection,
    Linear,
    Finsler,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a built-in scenario or a scenario file.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Absolute tolerance (overrides T2CALC_TOL).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        suite: Option<SuiteSelection>,
        /// Also write the resolved scenario to this path.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// List built-in scenarios.
    List,
    /// Validate a single object file.
    Check {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 25)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

fn env_tol() -> Result<Option<f64>, Error> {
    match std::env::var(TOL_ENV) {
        Ok(s) => s.trim().parse::<f64>().map(Some).map_err(|_| Error::Parse(format!("{TOL_ENV}={s} is not a number"))),
        Err(_) => Ok(None),
    }
}

fn load_scenario(arg: &str) -> Result<Scenario, Error> {
    let p = Path::new(arg);
    if p.exists() {
        Scenario::load(p)
    } else {
        builtin(arg)
    }
}

fn emit(r: &VerificationReport, f: Format) -> ExitCode {
    match f {
        Format::Json => println!("{}", r.to_json()),
        Format::Text => print!("{r}"),
    }
    if r.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.cmd {
        Cmd::List => {
            for (name, desc) in catalog() {
                println!("{name:<24} {desc}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Run { scenario, points, seed, tol, format, suite, save } => {
            let sc = load_scenario(&scenario)?;
            if let Some(path) = save {
                sc.save(&path)?;
            }
            let tol = match tol {
                Some(t) => Some(t),
                None => env_tol()?,
            };
            let r = run_scenario(&sc, &RunOptions { points, seed, tol, suite })?;
            Ok(emit(&r, format))
        }
        Cmd::Check { input, kind, points, seed, tol, format } => {
            let text = std::fs::read_to_string(&input).map_err(|e| Error::Io(format!("{}: {e}", input.display())))?;
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::schema("", e.to_string()))?;
            let kind = match kind {
                Kind::Connection => "connection",
                Kind::Linear => "linear",
                Kind::Finsler => "finsler",
            };
            let tol = match tol {
                Some(t) => Some(t),
                None => env_tol()?,
            };
            let r = check_object(kind, &v, points, seed, tol)?;
            Ok(emit(&r, format))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
