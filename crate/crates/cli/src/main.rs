//! `obsrank`: structural identifiability / observability analysis from the
//! command line.
//!
//! Exit codes: 0 full rank (FISPO), 1 rank deficient, 2 inconclusive or
//! timed out, 3 bad input or arguments.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use num::{bigint::BigInt, pow::Pow, BigRational};
use obsrank_core::analysis::{AnalysisOptions, AnalysisStatus};
use obsrank_core::model::{corpus, parse_model};
use obsrank_core::suite::{run_suite, suite_cells, CellStatus, GoldenMatch};
use obsrank_core::{Algorithm, AnalysisReport, DerivativeCap, OdeModel};

#[derive(Parser)]
#[command(
    name = "obsrank",
    version,
    about = "Structural observability, identifiability and input reconstructibility of ODE models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one model and print (or write) the verdict report.
    Analyze(AnalyzeArgs),
    /// Run a benchmark suite over the built-in corpus.
    Bench(BenchArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Path to a model file, or the name of a built-in benchmark model.
    #[arg(long)]
    model: String,
    /// Engine: fispo (symbolic) or probobs (power series).
    #[arg(long, default_value = "probobs")]
    algorithm: String,
    /// Fix a parameter to a value (substituted and removed) or give a state a
    /// known initial value. Repeatable. VALUE accepts integers, decimals and
    /// fractions like 3/4.
    #[arg(long = "fix", value_name = "NAME=VALUE")]
    fix: Vec<String>,
    /// Number of nonzero derivatives assumed for an unknown input.
    /// Repeatable.
    #[arg(long = "unknown-derivs", value_name = "NAME=K")]
    unknown_derivs: Vec<String>,
    /// Base RNG seed; falls back to OBSRANK_SEED, then a fixed default.
    #[arg(long)]
    seed: Option<u64>,
    /// Prime modulus for the specialization field.
    #[arg(long)]
    prime: Option<u64>,
    /// Highest Lie-derivative order the symbolic engine may build.
    #[arg(long)]
    max_lie: Option<usize>,
    /// Derivative orders built before the first rank check.
    #[arg(long)]
    min_lie: Option<usize>,
    /// Series truncation order for the probabilistic engine.
    #[arg(long)]
    truncation_order: Option<usize>,
    /// Expansion degree used when analytic functions must be rationalized.
    #[arg(long)]
    taylor_order: Option<usize>,
    /// Node cap for symbolic expression growth.
    #[arg(long)]
    node_budget: Option<usize>,
    /// Specialization retries after unlucky sample points.
    #[arg(long)]
    retry_budget: Option<usize>,
    /// Random draws come from [1, BOUND].
    #[arg(long, value_name = "BOUND")]
    sample_bound: Option<u64>,
    /// Wall-clock budget in seconds; exceeding it reports inconclusive.
    #[arg(long, value_name = "SECONDS")]
    budget: Option<u64>,
    /// Write the JSON report to this file ('-' for stdout).
    #[arg(long, value_name = "OUT")]
    json: Option<PathBuf>,
    /// Suppress the human-readable report.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite name: paper, c2m, small, or all.
    #[arg(long, default_value = "paper")]
    suite: String,
    /// Engines to run: fispo, probobs, or both.
    #[arg(long, default_value = "both")]
    algorithms: String,
    /// Per-run wall-clock budget in seconds; overruns become timeout rows.
    #[arg(long, value_name = "SECONDS")]
    budget: Option<u64>,
    /// Base RNG seed; falls back to OBSRANK_SEED, then a fixed default.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; row order and content do not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the JSON rows to this file ('-' for stdout).
    #[arg(long, value_name = "OUT")]
    json: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Bench(args) => run_bench(args),
    };
    std::process::exit(code);
}

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("obsrank: {msg}");
    3
}

fn seed_from_env() -> Result<Option<u64>, String> {
    match std::env::var("OBSRANK_SEED") {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| format!("OBSRANK_SEED is not an unsigned integer: {v:?}")),
        Err(_) => Ok(None),
    }
}

/// Integers, decimals, and fractions (possibly of decimals) such as
/// `3`, `-0.25`, `3/4`.
fn parse_rational(s: &str) -> Result<BigRational, String> {
    fn simple(s: &str) -> Result<BigRational, String> {
        let s = s.trim();
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(format!("bad number '{s}'"));
            }
            let digits: String = format!("{int}{frac}");
            let num = BigInt::from_str(&digits).map_err(|_| format!("bad number '{s}'"))?;
            let den = BigInt::from(10).pow(frac.len() as u32);
            Ok(BigRational::new(num, den))
        } else {
            let n = BigInt::from_str(s).map_err(|_| format!("bad number '{s}'"))?;
            Ok(BigRational::from(n))
        }
    }
    match s.split_once('/') {
        Some((a, b)) => {
            let den = simple(b)?;
            if den == BigRational::from(BigInt::from(0)) {
                return Err(format!("zero denominator in '{s}'"));
            }
            Ok(simple(a)? / den)
        }
        None => simple(s),
    }
}

fn split_kv<'a>(arg: &'a str, flag: &str) -> Result<(&'a str, &'a str), String> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| format!("--{flag} expects NAME=VALUE, got '{arg}'"))
}

fn load_model(spec: &str) -> Result<OdeModel, String> {
    let path = Path::new(spec);
    if path.exists() {
        let src = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let fallback = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("model");
        return parse_model(&src, fallback).map_err(|e| format!("{}: {e}", path.display()));
    }
    corpus::builtin_model(spec).map_err(|e| {
        format!("{e}; pass a model file path or one of the built-in names")
    })
}

fn build_options(args: &AnalyzeArgs) -> Result<AnalysisOptions, String> {
    let mut opts = AnalysisOptions::default();
    if let Some(seed) = args.seed.or(seed_from_env()?) {
        opts.seed = seed;
    }
    if let Some(p) = args.prime {
        opts.prime = p;
    }
    opts.max_lie = args.max_lie.or(opts.max_lie);
    opts.min_lie = args.min_lie.or(opts.min_lie);
    opts.truncation_order = args.truncation_order.or(opts.truncation_order);
    if let Some(k) = args.taylor_order {
        opts.taylor_order = k;
    }
    if let Some(n) = args.node_budget {
        opts.node_budget = n;
    }
    if let Some(n) = args.retry_budget {
        opts.retry_budget = n;
    }
    if let Some(b) = args.sample_bound {
        opts.sample_bound = b;
    }
    if let Some(secs) = args.budget {
        opts.deadline = Some(std::time::Instant::now() + Duration::from_secs(secs));
    }
    Ok(opts)
}

fn write_json(path: &Path, payload: &str) -> Result<(), String> {
    if path.as_os_str() == "-" {
        println!("{payload}");
        return Ok(());
    }
    std::fs::write(path, payload).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn exit_code_for(status: AnalysisStatus) -> i32 {
    match status {
        AnalysisStatus::Fispo => 0,
        AnalysisStatus::Deficient => 1,
        AnalysisStatus::Inconclusive => 2,
    }
}

fn run_analyze(args: AnalyzeArgs) -> i32 {
    let algorithm = match Algorithm::from_str(&args.algorithm) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    let mut model = match load_model(&args.model) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let mut fixes: Vec<(String, BigRational)> = Vec::new();
    for f in &args.fix {
        let (name, value) = match split_kv(f, "fix") {
            Ok(kv) => kv,
            Err(e) => return fail(e),
        };
        match parse_rational(value) {
            Ok(v) => fixes.push((name.to_string(), v)),
            Err(e) => return fail(e),
        }
    }
    if !fixes.is_empty() {
        model = match model.fix_variables(&fixes) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
    }
    for d in &args.unknown_derivs {
        let (name, k) = match split_kv(d, "unknown-derivs") {
            Ok(kv) => kv,
            Err(e) => return fail(e),
        };
        let cap: usize = match k.parse() {
            Ok(c) => c,
            Err(_) => return fail(format!("--unknown-derivs expects an integer cap, got '{k}'")),
        };
        if let Err(e) = model.set_input_cap(name, DerivativeCap::Finite(cap)) {
            return fail(e);
        }
    }
    let options = match build_options(&args) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let report: AnalysisReport = match obsrank_core::analyze(&model, algorithm, &options) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if !args.quiet {
        print!("{}", report.render_text());
    }
    if let Some(path) = &args.json {
        let payload = serde_json::to_string_pretty(&report).expect("report serializes");
        if let Err(e) = write_json(path, &payload) {
            return fail(e);
        }
    }
    exit_code_for(report.status)
}

fn run_bench(args: BenchArgs) -> i32 {
    let cells = match suite_cells(&args.suite) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let algorithms: Vec<Algorithm> = match args.algorithms.as_str() {
        "both" => vec![Algorithm::Fispo, Algorithm::ProbObs],
        other => match Algorithm::from_str(other) {
            Ok(a) => vec![a],
            Err(_) => {
                return fail(format!(
                    "--algorithms expects fispo, probobs, or both, got '{other}'"
                ))
            }
        },
    };
    let mut opts = AnalysisOptions::default();
    match args.seed.map(Ok).or_else(|| seed_from_env().transpose()) {
        Some(Ok(seed)) => opts.seed = seed,
        Some(Err(e)) => return fail(e),
        None => {}
    }
    let budget = args.budget.map(Duration::from_secs);
    let rows = run_suite(&cells, &algorithms, &opts, budget, args.jobs);
    println!(
        "{:>3}  {:<30} {:<12} {:<8} {:>7} {:<12} {:>11}  golden",
        "row", "model", "caps", "engine", "rank", "status", "time"
    );
    for row in &rows {
        println!("{}", row.render_line());
    }
    let matched = rows.iter().filter(|r| r.golden == GoldenMatch::Matched).count();
    let mismatched = rows
        .iter()
        .filter(|r| matches!(r.golden, GoldenMatch::Mismatched { .. }))
        .count();
    let timeouts = rows.iter().filter(|r| r.status == CellStatus::Timeout).count();
    let errors = rows.iter().filter(|r| r.status == CellStatus::Error).count();
    println!(
        "{} rows: {matched} matched golden, {mismatched} mismatched, {timeouts} timeouts, \
         {errors} errors",
        rows.len()
    );
    if let Some(path) = &args.json {
        let payload = serde_json::to_string_pretty(&rows).expect("rows serialize");
        if let Err(e) = write_json(path, &payload) {
            return fail(e);
        }
    }
    if mismatched > 0 || errors > 0 {
        1
    } else {
        0
    }
}
