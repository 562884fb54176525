use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use lpvq::quantizer::{self, QuantizerConfig};
use lpvq::{oracle, pmean, Error, MeasureSpace, Norm, SimpleFunction};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "lpvq", version, about = "Best k-valued approximation in L^p Bochner norms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run Lloyd restarts and report the best simple function.
    Quantize(Common),
    /// Solve the p-th mean of one cell.
    Pmean {
        #[command(flatten)]
        common: Common,
        /// Comma-separated atom indices (default: all atoms).
        #[arg(long, value_delimiter = ',')]
        cell: Option<Vec<usize>>,
    },
    /// Exact optimum by exhaustive search.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = oracle::DEFAULT_LIMIT)]
        max_assignments: u128,
    },
    /// Recompute the certificate of a simple function or a quantize report.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        function: PathBuf,
    },
    /// Center trajectory of the best restart.
    Trace(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value = "euclidean")]
    norm: String,
    #[arg(long, default_value = "2", value_parser = parse_p)]
    p: f64,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 1e-9)]
    tie_tol: f64,
    #[arg(long)]
    pinned_zero: bool,
}

fn parse_p(s: &str) -> Result<f64, String> {
    lpvq::exponent::parse(s).map_err(|e| e.to_string())
}

impl Common {
    fn config(&self, k: usize) -> QuantizerConfig {
        QuantizerConfig {
            p: self.p,
            k,
            restarts: self.restarts,
            seed: self.seed,
            tol: self.tol,
            max_iter: self.max_iter,
            tie_tol: self.tie_tol,
            pinned_zero: self.pinned_zero,
            jobs: self.jobs,
        }
    }

    fn k(&self) -> Result<usize, Failure> {
        self.k.ok_or_else(|| Failure::usage("missing required flag --k"))
    }

    fn load(&self) -> Result<(MeasureSpace, Norm), Failure> {
        let space = MeasureSpace::from_path(&self.space)?;
        let norm = Norm::parse(&self.norm, space.dim())?;
        Ok((space, norm))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    space: String,
    norm: &'a str,
    config: Value,
    version: &'static str,
    timestamp: u64,
    seed_used: Option<u64>,
}

struct Failure {
    kind: String,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { kind: "Usage".into(), message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let debug = format!("{e:?}");
        let kind = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string();
        Failure { kind, message: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            eprint!("{message}");
            emit_error(&Failure::usage(message.lines().next().unwrap_or("invalid arguments")));
            return ExitCode::from(2);
        }
    };
    match run(&cli.command) {
        Ok(report) => {
            emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("lpvq: {}", f.message);
            emit_error(&f);
            ExitCode::from(2)
        }
    }
}

fn emit_error(f: &Failure) {
    emit(&json!({ "error": { "kind": f.kind, "message": f.message } }).to_string());
}

// a closed pipe downstream is not an error worth panicking over
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(command: &Command) -> Result<Value, Failure> {
    let (name, common) = match command {
        Command::Quantize(c) => ("quantize", c),
        Command::Pmean { common, .. } => ("pmean", common),
        Command::Oracle { common, .. } => ("oracle", common),
        Command::Certify { common, .. } => ("certify", common),
        Command::Trace(c) => ("trace", c),
    };
    let (space, norm) = common.load()?;
    let (config, seed_used, result) = match command {
        Command::Quantize(c) => {
            let cfg = c.config(c.k()?);
            let report = quantizer::lloyd(&space, &norm, &cfg)?;
            (serde_json::to_value(&cfg)?, Some(report.seed_used), serde_json::to_value(report)?)
        }
        Command::Trace(c) => {
            let cfg = c.config(c.k()?);
            let trace = quantizer::minimizing_trace(&space, &norm, &cfg)?;
            (serde_json::to_value(&cfg)?, Some(trace.seed_used), serde_json::to_value(trace)?)
        }
        Command::Pmean { common: c, cell } => {
            let cell = cell.clone().unwrap_or_else(|| (0..space.len()).collect());
            let result = if c.p.is_infinite() {
                pmean::chebyshev_center(&space, &cell, &norm, c.tol)?
            } else {
                pmean::solve_pmean(&space, &cell, &norm, c.p, c.tol, c.max_iter)?
            };
            let config = json!({ "p": p_value(c.p), "tol": c.tol, "max_iter": c.max_iter, "cell": cell });
            (config, None, serde_json::to_value(result)?)
        }
        Command::Oracle { common: c, max_assignments } => {
            let k = c.k()?;
            let result = oracle::brute_force_with_limit(&space, &norm, c.p, k, *max_assignments)?;
            let config = json!({ "p": p_value(c.p), "k": k, "max_assignments": max_assignments.to_string() });
            (config, None, serde_json::to_value(result)?)
        }
        Command::Certify { common: c, function } => {
            let g = read_function(function)?;
            let cfg = c.config(c.k.unwrap_or(g.k()));
            let certificate = quantizer::certify(&space, &norm, &cfg, &g)?;
            let cost = g.cost(&space, &norm, c.p)?;
            (serde_json::to_value(&cfg)?, None, json!({ "cost": cost, "certificate": certificate }))
        }
    };
    let manifest = Manifest {
        subcommand: name,
        space: common.space.display().to_string(),
        norm: &common.norm,
        config,
        version: env!("CARGO_PKG_VERSION"),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        seed_used,
    };
    let mut report = json!({ "manifest": manifest });
    if let (Value::Object(out), Value::Object(body)) = (&mut report, result) {
        out.extend(body);
    }
    Ok(report)
}

fn p_value(p: f64) -> Value {
    if p.is_infinite() {
        json!("inf")
    } else {
        json!(p)
    }
}

/// Accepts a bare simple function or a quantize report (its `best` field).
fn read_function(path: &PathBuf) -> Result<SimpleFunction, Failure> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let value: Value = serde_json::from_str(&text)?;
    let value = match value {
        Value::Object(mut m) if m.contains_key("best") => m.remove("best").unwrap_or_default(),
        v => v,
    };
    Ok(serde_json::from_value(value)?)
}
