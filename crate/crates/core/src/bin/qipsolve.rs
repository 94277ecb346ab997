//! `qipsolve`: generate, validate, solve, audit and benchmark problems.
//!
//! Exit codes: 0 success, 1 audit failure, 2 usage error, 3 invalid problem,
//! 4 solver failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qipsolve::oracle::audit;
use qipsolve::pathfollow::{solve_with_progress, SolveReport, SolverConfig, StepRecord, Termination};
use qipsolve::probio::{build_named, generate_random_with, load, save, Dims, NAMED_PATTERNS};
use qipsolve::{Error, Generator, Objective, ProblemKind, ProblemSpec};

const EXIT_AUDIT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_SOLVER: u8 = 4;

#[derive(Parser)]
#[command(name = "qipsolve", version, about = "Path-following solver for matrix-function and quantum relative entropy objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random or named problem file.
    Gen(GenArgs),
    /// Parse and validate a problem file.
    Validate(Source),
    /// Solve a problem.
    Solve(SolveArgs),
    /// Finite-difference and invariant audit of the objective derivatives.
    Check(CheckArgs),
    /// Solve a ladder of random instances and print a results table.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "type1")]
    kind: ProblemKind,
    #[arg(long, required_unless_present = "named")]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    m: usize,
    #[arg(long = "N", default_value_t = 0)]
    big_n: usize,
    #[arg(long, default_value_t = 0)]
    r1: usize,
    #[arg(long, default_value_t = 0)]
    r2: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scalar function for type I/II (neg-log, inverse, neg-sqrt, neg-power:α).
    #[arg(long)]
    generator: Option<Generator>,
    /// Canonical instance instead of a random one.
    #[arg(long, conflicts_with_all = ["n", "k", "m", "big_n", "r1", "r2", "generator"])]
    named: Option<String>,
    /// Output file; prints JSON to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Source {
    /// Problem file.
    #[arg(required_unless_present = "named")]
    problem: Option<PathBuf>,
    /// Canonical instance name instead of a file.
    #[arg(long, conflicts_with = "problem")]
    named: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Drop the log-det barrier of a QKD problem (heuristic mode).
    #[arg(long)]
    no_barrier: bool,
    /// Per-step CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print every Newton step to stderr.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 3)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true)]
    corrupt_hessian: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Table1,
    Table2,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Orders `n` to run (default: the whole ladder).
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of after the table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn classify(e: Error) -> Failure {
    let code = match e {
        Error::Parse { .. }
        | Error::Validation(_)
        | Error::InfeasibleStart(_)
        | Error::ShapeError(_)
        | Error::ConstraintError(_)
        | Error::InvalidMatrix(_)
        | Error::NotFound(_)
        | Error::DomainViolation(_) => EXIT_INVALID,
        Error::Io(_) => EXIT_USAGE,
        _ => EXIT_SOLVER,
    };
    let mut message = e.to_string();
    if matches!(e, Error::NotFound(_)) {
        message.push_str(&format!("; known names: {}", NAMED_PATTERNS.join(", ")));
    }
    Failure::new(code, message)
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Check(a) => cmd_check(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_source(src: &Source) -> std::result::Result<ProblemSpec, Failure> {
    let spec = match (&src.problem, &src.named) {
        (_, Some(name)) => build_named(name),
        (Some(path), None) => load(path),
        (None, None) => return Err(Failure::new(EXIT_USAGE, "no problem given")),
    }
    .map_err(classify)?;
    spec.validate().map_err(classify)?;
    Ok(spec)
}

fn dims_line(spec: &ProblemSpec) -> String {
    let d = spec.dims;
    match spec.kind() {
        ProblemKind::TypeI => format!("n = {}, m = {}, N = {}", d.n, d.m, d.big_n),
        ProblemKind::TypeII => format!("n = {}, k = {}, m = {}", d.n, d.k, d.m),
        ProblemKind::Qkd => format!("n = {}, k = {}, m = {}, r1 = {}, r2 = {}", d.n, d.k, d.m, d.r1, d.r2),
    }
}

fn cmd_gen(a: GenArgs) -> Outcome {
    let spec = match &a.named {
        Some(name) => build_named(name),
        None => generate_random_with(
            a.kind,
            Dims {
                n: a.n.unwrap_or(0),
                k: a.k,
                m: a.m,
                big_n: a.big_n,
                r1: a.r1,
                r2: a.r2,
            },
            a.seed,
            a.generator,
        ),
    }
    .map_err(classify)?;
    match &a.out {
        Some(path) => {
            save(&spec, path).map_err(classify)?;
            println!("{} ({}): {}", spec.name, spec.kind(), dims_line(&spec));
            println!("wrote {}", path.display());
        }
        None => {
            let text = qipsolve::probio::to_json_string(&spec).map_err(classify)?;
            println!("{text}");
            eprintln!("{} ({}): {}", spec.name, spec.kind(), dims_line(&spec));
        }
    }
    Ok(())
}

fn cmd_validate(a: Source) -> Outcome {
    let spec = load_source(&a)?;
    println!("ok: {} ({}): {}", spec.name, spec.kind(), dims_line(&spec));
    Ok(())
}

fn config_from(a: &SolveArgs) -> SolverConfig {
    let mut c = SolverConfig::default();
    if let Some(v) = a.beta0 {
        c.beta0 = v;
    }
    if let Some(v) = a.theta {
        c.theta = v;
    }
    if let Some(v) = a.eps {
        c.epsilon = v;
    }
    if let Some(v) = a.kappa {
        c.kappa = v;
    }
    if let Some(v) = a.max_outer {
        c.max_outer = v;
    }
    c
}

fn write_trace(path: &Path, steps: &[StepRecord]) -> Outcome {
    let io = |e: csv::Error| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["step", "beta", "delta", "alpha", "f", "feas_residual"]).map_err(io)?;
    for s in steps {
        w.write_record([
            s.step.to_string(),
            format!("{:e}", s.beta),
            format!("{:e}", s.delta),
            format!("{:e}", s.alpha),
            format!("{:e}", s.f),
            format!("{:e}", s.feas_residual),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn cmd_solve(a: SolveArgs) -> Outcome {
    let mut spec = load_source(&a.source)?;
    if a.no_barrier {
        match &mut spec.objective {
            Objective::Qkd { barrier, .. } => *barrier = false,
            _ => return Err(Failure::new(EXIT_USAGE, "--no-barrier applies to qkd problems only")),
        }
    }
    let config = config_from(&a);
    let start = spec.start_point().map_err(classify)?.clone();
    let verbose = a.verbose;
    let mut progress = |s: &StepRecord| {
        if verbose {
            eprintln!(
                "step {:>4}  outer {:>3}  beta {:>10.3e}  delta {:>10.3e}  alpha {:>8.2e}  f {:>+.10e}",
                s.step, s.outer, s.beta, s.delta, s.alpha, s.f
            );
        }
    };
    let report = solve_with_progress(&spec, &start, &config, &mut progress).map_err(classify)?;
    if let Some(path) = &a.trace {
        write_trace(path, &report.steps)?;
    }
    if let Some(path) = &a.out {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, text).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    }
    print_summary(&report);
    if report.termination != Termination::Converged {
        return Err(Failure::new(
            EXIT_SOLVER,
            format!(
                "{}: {}",
                report.termination,
                report.message.as_deref().unwrap_or("no detail")
            ),
        ));
    }
    Ok(())
}

fn print_summary(r: &SolveReport) {
    println!("problem      {} ({})", r.name, r.kind);
    println!("termination  {}", r.termination);
    println!("f_min        {:.10}", r.f_min);
    println!("nNewton      {}", r.total_newton);
    println!("outer iters  {}", r.outer_iters);
    println!("final beta   {:.3e}", r.final_beta);
    println!("final delta  {:.3e}", r.final_delta);
    if let Some(gap) = r.certificates.last() {
        println!("gap bound    {gap:.3e}");
    }
    println!(
        "bound check  total {} <= {:.0}: {}, per outer {} <= {:.0}: {}",
        r.bound_check.total_observed,
        r.bound_check.total_cap,
        r.bound_check.within_total,
        r.bound_check.max_inner_observed,
        r.bound_check.per_outer_cap,
        r.bound_check.within_per_outer
    );
    if r.heuristic {
        println!("note         barrier omitted, bounds do not apply");
    }
    println!("time         {:.3} s", r.wall_time);
}

fn cmd_check(a: CheckArgs) -> Outcome {
    let spec = load_source(&a.source)?;
    let report = audit(&spec, a.points, a.seed, a.corrupt_hessian).map_err(classify)?;
    for c in &report.checks {
        println!(
            "{}  {:<18} point {}  value {:.3e}  tol {:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.point,
            c.value,
            c.tolerance
        );
    }
    println!("hessian lambda_min estimate {:.6e}", report.min_hessian_eigenvalue);
    if report.passed() {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Err(Failure::new(EXIT_AUDIT, format!("failed checks: {}", failed.join(", "))))
    }
}

/// Rows `(n, k, m, r1, r2)` of the QKD ladder.
const TABLE2_LADDER: &[(usize, usize, usize, usize, usize)] =
    &[(4, 8, 2, 2, 2), (6, 12, 4, 1, 2), (12, 24, 6, 2, 4), (16, 32, 10, 2, 2), (32, 64, 20, 2, 2)];
const TABLE1_SIZES: &[usize] = &[4, 8, 16, 32, 64];

fn bench_threads() -> usize {
    std::env::var("QIPSOLVE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
}

fn bench_row(kind: ProblemKind, dims: Dims, seed: u64) -> std::result::Result<SolveReport, String> {
    let spec = generate_random_with(kind, dims, seed, None).map_err(|e| e.to_string())?;
    let start = spec.start_point().map_err(|e| e.to_string())?.clone();
    qipsolve::solve(&spec, &start, &SolverConfig::default()).map_err(|e| e.to_string())
}

fn cmd_bench(a: BenchArgs) -> Outcome {
    let (kind, rows): (ProblemKind, Vec<Dims>) = match a.suite {
        Suite::Table1 => {
            let sizes = if a.sizes.is_empty() { TABLE1_SIZES.to_vec() } else { a.sizes.clone() };
            let rows = sizes
                .into_iter()
                .map(|n| Dims {
                    n,
                    m: n / 2,
                    big_n: n,
                    ..Dims::default()
                })
                .collect();
            (ProblemKind::TypeI, rows)
        }
        Suite::Table2 => {
            let rows: Vec<Dims> = TABLE2_LADDER
                .iter()
                .filter(|r| a.sizes.is_empty() || a.sizes.contains(&r.0))
                .map(|&(n, k, m, r1, r2)| Dims {
                    n,
                    k,
                    m,
                    big_n: m,
                    r1,
                    r2,
                })
                .collect();
            if rows.is_empty() {
                return Err(Failure::new(EXIT_USAGE, "no ladder row matches --sizes"));
            }
            (ProblemKind::Qkd, rows)
        }
    };

    // independent solves on a small pool; results keep row order
    let results: Vec<Mutex<Option<std::result::Result<SolveReport, String>>>> =
        rows.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..bench_threads().min(rows.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= rows.len() {
                    break;
                }
                let r = bench_row(kind, rows[i], a.seed);
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });

    let header: &[&str] = match a.suite {
        Suite::Table1 => &["n", "m", "N", "f_min", "nNewton", "Time"],
        Suite::Table2 => &["n", "k", "m", "r1", "r2", "Time", "f_min", "nNewton"],
    };
    let mut table: Vec<Vec<String>> = Vec::new();
    let mut failures = Vec::new();
    for (d, cell) in rows.iter().zip(results) {
        let r = cell.into_inner().unwrap().expect("every row ran");
        let (f, newton, time) = match &r {
            Ok(rep) => {
                if rep.termination != Termination::Converged {
                    failures.push(format!("n = {}: {}", d.n, rep.termination));
                }
                (format!("{:.6}", rep.f_min), rep.total_newton.to_string(), format!("{:.2}", rep.wall_time))
            }
            Err(e) => {
                failures.push(format!("n = {}: {e}", d.n));
                ("nan".into(), "0".into(), "nan".into())
            }
        };
        table.push(match a.suite {
            Suite::Table1 => vec![d.n.to_string(), d.m.to_string(), d.big_n.to_string(), f, newton, time],
            Suite::Table2 => vec![
                d.n.to_string(),
                d.k.to_string(),
                d.m.to_string(),
                d.r1.to_string(),
                d.r2.to_string(),
                time,
                f,
                newton,
            ],
        });
    }

    let widths: Vec<usize> = (0..header.len())
        .map(|j| table.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let head: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    println!("{}", line(&head));
    for row in &table {
        println!("{}", line(row));
    }

    let mut csv_out = csv::Writer::from_writer(Vec::new());
    csv_out.write_record(header).expect("in-memory write");
    for row in &table {
        csv_out.write_record(row).expect("in-memory write");
    }
    let bytes = csv_out.into_inner().expect("in-memory flush");
    match &a.csv {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))?,
        None => {
            println!();
            std::io::stdout().write_all(&bytes).ok();
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_SOLVER, failures.join("; ")))
    }
}
