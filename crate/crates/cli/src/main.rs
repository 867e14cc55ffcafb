use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use zerocheck::checker::SCHEMA_VERSION;
use zerocheck::expr::DEFAULT_VAR;
use zerocheck::figures::{log_probability_curves, table1};
use zerocheck::grid::GridModel;
use zerocheck::harness::{simulate_failure_rate, ZeroUniverse};
use zerocheck::prob::{error_probability_with, Exactness};
use zerocheck::{
    compare_answers, parse_with_var, CheckConfig, CheckError, CheckReport, EvalBudget, Execution, ExprError,
    FinalVerdict, GridMode, ProbParams, Segment, SegmentPlan, ToleranceSpec,
};

const EXIT_INCORRECT: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

#[derive(Parser)]
#[command(name = "zerocheck", version, about = "Check whether two single-variable expressions are equal")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare a reference answer with a submitted one
    Check(CheckArgs),
    /// Probability that m random checks all land on one of k zeros
    Prob(ProbArgs),
    /// Grid size M and spacing for a segment
    Grid(GridArgs),
    /// Grid sizes for [A, A+5], A = 10, 100, ..., 1e9, as CSV
    Table1,
    /// ln P_err against k for several m, as CSV
    Curves(CurvesArgs),
    /// Monte Carlo estimate of the failure probability
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Reference answer
    #[arg(allow_hyphen_values = true)]
    real: String,
    /// Submitted answer
    #[arg(allow_hyphen_values = true)]
    user: String,
    #[arg(long, default_value = DEFAULT_VAR)]
    var: String,
    /// Number of random disjoint segments
    #[arg(long, default_value_t = 3)]
    segments: usize,
    /// Length of each random segment
    #[arg(long, default_value_t = 10.0)]
    seg_len: f64,
    /// Range the random segments are placed in
    #[arg(long, default_value = "1:100", value_parser = parse_segment, allow_hyphen_values = true)]
    range: Segment,
    /// Explicit segment (repeatable); overrides the random placement
    #[arg(long = "segment", value_parser = parse_segment, allow_hyphen_values = true)]
    explicit: Vec<Segment>,
    /// Check points per segment (m)
    #[arg(long, default_value_t = 100)]
    points: u64,
    /// Assumed bound on zeros per segment (k)
    #[arg(long, default_value_t = 1_000_000)]
    k: u64,
    #[arg(long, default_value_t = ToleranceSpec::default().absolute)]
    tol_abs: f64,
    #[arg(long, default_value_t = ToleranceSpec::default().relative)]
    tol_rel: f64,
    #[arg(long, default_value_t = CheckConfig::default().seed)]
    seed: u64,
    /// Grid model: relative or ulp
    #[arg(long, default_value_t = GridMode::RelativeEps)]
    grid: GridMode,
    /// Node visits allowed per evaluation
    #[arg(long, default_value_t = zerocheck::eval::DEFAULT_MAX_NODE_VISITS)]
    max_visits: u64,
    /// Wall-clock limit per evaluation, in milliseconds
    #[arg(long)]
    time_limit_ms: Option<u64>,
    /// Print the report as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ProbArgs {
    /// Grid size
    #[arg(long = "M")]
    grid_points: u64,
    /// Check points
    #[arg(long = "m")]
    checks: u64,
    /// Zero count
    #[arg(long)]
    k: u64,
    /// Also print the natural log
    #[arg(long)]
    log: bool,
    /// Compute the exact rational whatever the grid size
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    #[arg(long, default_value_t = GridMode::RelativeEps)]
    mode: GridMode,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    b: f64,
    #[arg(long, value_delimiter = ',', default_value = "10,20,25,50,100")]
    m_list: Vec<u64>,
    #[arg(long, default_value_t = 1_000)]
    k_from: u64,
    #[arg(long, default_value_t = 1_000_000_000_000)]
    k_to: u64,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = GridMode::RelativeEps)]
    mode: GridMode,
    /// Write the CSV here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long = "M")]
    grid_points: u64,
    #[arg(long = "m")]
    checks: u64,
    #[arg(long)]
    k: u64,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_segment(text: &str) -> Result<Segment, String> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| format!("expected A:B, got {text:?}"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("bad A in {text:?}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("bad B in {text:?}: {e}"))?;
    Segment::new(a, b).map_err(|e| e.to_string())
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }

    fn data(e: impl ToString) -> Self {
        Failure {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::usage(e)
    }
}

impl From<CheckError> for Failure {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::Expr(e) => Failure::data(e),
            other => Failure::usage(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli.command, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let _ = out.flush();
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command, out: &mut impl Write) -> Result<u8, Failure> {
    match command {
        Command::Check(args) => check(args, out),
        Command::Prob(args) => prob(args, out),
        Command::Grid(args) => grid(args, out),
        Command::Table1 => {
            writeln!(out, "a,b,M")?;
            for row in table1() {
                writeln!(out, "{},{},{}", row.a, row.b, row.grid_points)?;
            }
            Ok(0)
        }
        Command::Curves(args) => curves(args, out),
        Command::Simulate(args) => simulate(args, out),
    }
}

fn check(args: CheckArgs, out: &mut impl Write) -> Result<u8, Failure> {
    let real = parse_with_var(&args.real, &args.var).map_err(|e| Failure::data(format!("reference answer: {e}")))?;
    let user = parse_with_var(&args.user, &args.var).map_err(|e| Failure::data(format!("submitted answer: {e}")))?;
    let segments = if args.explicit.is_empty() {
        SegmentPlan::Auto {
            count: args.segments,
            length: args.seg_len,
            range: args.range,
        }
    } else {
        SegmentPlan::Explicit(args.explicit)
    };
    let mut budget = EvalBudget::new(args.max_visits);
    if let Some(ms) = args.time_limit_ms {
        budget = budget.with_wall_clock_limit(Duration::from_millis(ms));
    }
    let cfg = CheckConfig {
        segments,
        points: args.points,
        tolerance: ToleranceSpec {
            absolute: args.tol_abs,
            relative: args.tol_rel,
        },
        budget,
        seed: args.seed,
        assumed_zeros: args.k,
        grid_mode: args.grid,
        execution: Execution::default(),
    };
    let report = compare_answers(&real, &user, &cfg).map_err(|e| match e {
        CheckError::Expr(ExprError::Parse(p)) => Failure::data(p),
        other => other.into(),
    })?;
    if args.json {
        writeln!(out, "{}", report.to_json())?;
    } else {
        print_report(&report, out)?;
    }
    Ok(match report.verdict {
        FinalVerdict::Correct | FinalVerdict::CorrectWithBound => 0,
        FinalVerdict::Incorrect => EXIT_INCORRECT,
        FinalVerdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

fn print_report(report: &CheckReport, out: &mut impl Write) -> io::Result<()> {
    let doc = report.to_document();
    writeln!(out, "verdict: {}", doc.verdict.label())?;
    writeln!(out, "stage: {}", doc.stage.label())?;
    for s in &doc.segments {
        writeln!(
            out,
            "segment [{}, {}]: M={} tested={} resampled={} {}",
            s.a,
            s.b,
            s.grid_points,
            s.points_tested,
            s.resampled,
            s.outcome.label()
        )?;
    }
    if let Some(w) = doc.witness {
        writeln!(out, "witness: f({}) = {}", w.x, num(w.fx))?;
    }
    if doc.verdict == FinalVerdict::CorrectWithBound {
        match doc.log_error_bound {
            Some(lb) if doc.error_bound == 0.0 => {
                writeln!(out, "error bound: exp({lb:.4}) (below f64 range)")?
            }
            _ => writeln!(out, "error bound: {}", num(doc.error_bound))?,
        }
        writeln!(out, "assumed zeros per segment: {}", doc.assumed_k)?;
    }
    writeln!(out, "seed: {} (schema {SCHEMA_VERSION})", doc.seed)
}

fn prob(args: ProbArgs, out: &mut impl Write) -> Result<u8, Failure> {
    let params = ProbParams::new(args.grid_points, args.checks, args.k);
    let exactness = if args.exact { Exactness::Always } else { Exactness::Auto };
    let result = error_probability_with(params, exactness);
    if args.json {
        let doc = serde_json::json!({ "params": params, "result": result });
        writeln!(out, "{}", serde_json::to_string_pretty(&doc).map_err(Failure::usage)?)?;
        return Ok(0);
    }
    writeln!(out, "P_err = {}", num(result.value))?;
    if args.log {
        writeln!(out, "ln P_err = {}", result.log_value)?;
        writeln!(out, "log10 P_err = {}", result.log_value / std::f64::consts::LN_10)?;
    }
    if let Some(exact) = result.exact.as_ref().filter(|_| args.exact) {
        writeln!(out, "exact = {exact}")?;
    }
    Ok(0)
}

fn grid(args: GridArgs, out: &mut impl Write) -> Result<u8, Failure> {
    let segment = Segment::new(args.a, args.b).map_err(Failure::usage)?;
    let model = GridModel::new(segment, args.mode).map_err(Failure::usage)?;
    writeln!(out, "M = {}", model.points)?;
    writeln!(out, "eps_B = {}", num(model.epsilon))?;
    Ok(0)
}

fn curves(args: CurvesArgs, out: &mut impl Write) -> Result<u8, Failure> {
    let segment = Segment::new(args.a, args.b).map_err(Failure::usage)?;
    if args.k_from > args.k_to {
        return Err(Failure::usage("--k-from must not exceed --k-to"));
    }
    let points = log_probability_curves(
        segment,
        args.mode,
        &args.m_list,
        args.k_from,
        args.k_to,
        args.steps,
        Execution::default(),
    )
    .map_err(Failure::usage)?;
    let write_csv = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(w, "m,k,log_p")?;
        for p in &points {
            writeln!(w, "{},{},{}", p.m, p.k, p.log_p)?;
        }
        w.flush()
    };
    match args.out {
        Some(path) => write_csv(&mut BufWriter::new(File::create(path)?))?,
        None => write_csv(out)?,
    }
    Ok(0)
}

fn simulate(args: SimulateArgs, out: &mut impl Write) -> Result<u8, Failure> {
    let universe = ZeroUniverse::first_k(args.grid_points, args.k).map_err(Failure::usage)?;
    let sim = simulate_failure_rate(&universe, args.checks, args.trials, args.seed, Execution::default())
        .map_err(Failure::usage)?;
    let formula = error_probability_with(
        ProbParams::new(args.grid_points, args.checks, args.k),
        Exactness::Auto,
    )
    .value;
    writeln!(out, "rate = {}", num(sim.rate))?;
    writeln!(out, "stderr = {}", num(sim.stderr))?;
    writeln!(out, "formula = {}", num(formula))?;
    writeln!(out, "z = {:.3}", sim.z_score(formula))?;
    Ok(0)
}

/// Plain decimal for moderate magnitudes, scientific notation otherwise.
fn num(v: f64) -> String {
    if v == 0.0 || (1e-4..1e6).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
