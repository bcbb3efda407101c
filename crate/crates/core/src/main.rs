use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use partexp::experiments::{
    append_csv, convergence_study, parse_geometric, reference_solution, work_precision_study, Status, StudyOptions, StudyRow, CSV_HEADER,
};
use partexp::integrators::Method;
use partexp::order_conditions::{exact_coeffs, tree_table, Rational, WeightSet};
use partexp::problems::{self, ProblemParams, DEFAULT_SEED, PRESET_NAMES, PROBLEM_NAMES};
use partexp::tableaus::{self, MethodTableau, BUILTIN_NAMES, DEFAULT_ORDER_TOL};
use partexp::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Partitioned exponential W-methods: convergence studies and order checks.
#[derive(Parser)]
#[command(name = "partexp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Builtin methods and problems.
    List,
    /// Check the order conditions of a tableau with the B-series engine.
    VerifyOrder(VerifyArgs),
    /// Fixed-step convergence study.
    RunFixed(FixedArgs),
    /// Adaptive work-precision study.
    RunAdaptive(AdaptiveArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Builtin method name.
    #[arg(long, conflicts_with = "tableau", required_unless_present = "tableau")]
    method: Option<String>,
    /// Tableau in JSON form.
    #[arg(long)]
    tableau: Option<PathBuf>,
    /// Residual tolerance; 0 demands exact agreement.
    #[arg(long, default_value_t = DEFAULT_ORDER_TOL)]
    tol: f64,
    /// Write the per-tree coefficient comparison here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// Comma-separated builtin names or JSON tableau files.
    #[arg(long, value_delimiter = ',', required = true)]
    method: Vec<String>,
    #[arg(long)]
    problem: String,
    /// Grid size (PDEs) or dimension (Lorenz-96).
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel cells; PARTEXP_WORKERS takes precedence.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write cpu_seconds as 0.
    #[arg(long)]
    no_timing: bool,
    /// Use the grid sizes of the original experiments.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct FixedArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Step sizes as start:/ratio:count.
    #[arg(long)]
    h_seq: String,
    /// Finest step for the reference integrator (default: smallest h).
    #[arg(long)]
    ref_h: Option<f64>,
}

#[derive(Args)]
struct AdaptiveArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Comma-separated tolerances.
    #[arg(long, value_delimiter = ',', conflicts_with = "tol_seq", required_unless_present = "tol_seq")]
    tols: Vec<f64>,
    /// Tolerances as start:/ratio:count.
    #[arg(long)]
    tol_seq: Option<String>,
    /// Finest step for the reference integrator (default: span / 1000).
    #[arg(long)]
    ref_h: Option<f64>,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownMethod { .. } | Error::UnknownProblem { .. } | Error::Parse(_) | Error::Contract(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn io_failure(e: io::Error) -> Failure {
    Failure::Numerical(format!("I/O error: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            list();
            Ok(())
        }
        Command::VerifyOrder(a) => verify_order(&a),
        Command::RunFixed(a) => run_fixed(&a),
        Command::RunAdaptive(a) => run_adaptive(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}

fn list() {
    println!("methods:");
    for name in BUILTIN_NAMES {
        let t = tableaus::builtin(name).expect("builtin");
        let emb = t.embedded_order().map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        println!("  {name:<10} {:<8} order {}  embedded {emb}", t.family().to_string(), t.order());
    }
    println!("problems:");
    for name in PROBLEM_NAMES {
        println!("  {name}");
    }
    println!("presets:");
    for name in PRESET_NAMES {
        println!("  {name}");
    }
}

fn load_tableau(spec: &str) -> Result<MethodTableau, Failure> {
    if spec.ends_with(".json") || Path::new(spec).is_file() {
        let text = std::fs::read_to_string(spec).map_err(|e| Failure::Usage(format!("cannot read {spec}: {e}")))?;
        return Ok(MethodTableau::from_json(&text)?);
    }
    Ok(tableaus::builtin(spec)?)
}

fn verify_order(a: &VerifyArgs) -> Result<(), Failure> {
    let t = match (&a.method, &a.tableau) {
        (Some(m), _) => load_tableau(m)?,
        (None, Some(p)) => load_tableau(&p.to_string_lossy())?,
        (None, None) => unreachable!("clap enforces one of --method/--tableau"),
    };
    let report = tableaus::validate(&t);
    if let Some(e) = &report.shape_error {
        return Err(Failure::Usage(format!("{}: {e}", report.name)));
    }
    println!("{} ({}, {} partition(s))", report.name, t.family(), t.partitions());
    for check in &report.checks {
        let label = match check.weights {
            WeightSet::Main => "order",
            WeightSet::Embedded => "embedded order",
        };
        let r = &check.report;
        let verdict = if check.passed(a.tol) { "PASS" } else { "FAIL" };
        println!(
            "{label} {}: {verdict} (max residual {})",
            check.order,
            fmt_residual(&r.max_residual())
        );
        for slot in r.violations(a.tol).iter().take(10) {
            let i = r.checked.iter().position(|s| s == slot).expect("violation is a checked slot");
            println!(
                "  tree {slot:>3} {:<16} residual {}",
                tree_table().trees[slot - 1].to_string(),
                r.residuals[i]
            );
        }
    }
    if let Some(path) = &a.csv {
        write_tree_csv(path, &report).map_err(io_failure)?;
    }
    if report.passed(a.tol) {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "{} does not satisfy its declared order conditions",
            report.name
        )))
    }
}

fn fmt_residual(q: &Rational) -> String {
    use num_traits::Zero;
    if q.is_zero() {
        "0".into()
    } else {
        format!("{:.3e}", tableaus::to_f64(q))
    }
}

fn write_tree_csv(path: &Path, report: &tableaus::ValidationReport) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["weights", "slot", "tree", "order", "checked", "numerical", "exact", "residual"])?;
    for check in &report.checks {
        let r = &check.report;
        let exact = exact_coeffs::<Rational>(r.kind);
        let weights = match check.weights {
            WeightSet::Main => "main",
            WeightSet::Embedded => "embedded",
        };
        for (i, tree) in tree_table().trees.iter().enumerate() {
            let slot = i + 1;
            let num = r.numerical.get(slot);
            let ex = exact.get(slot);
            w.write_record([
                weights.to_string(),
                slot.to_string(),
                tree.to_string(),
                tree.order().to_string(),
                r.checked.contains(&slot).to_string(),
                num.to_string(),
                ex.to_string(),
                (num - ex).to_string(),
            ])?;
        }
    }
    w.flush()
}

struct Study {
    methods: Vec<Method>,
    ivp: partexp::integrators::PartitionedIvp,
    opts: StudyOptions,
    sink: Box<dyn Write>,
    to_stdout: bool,
}

fn prepare(a: &StudyArgs) -> Result<Study, Failure> {
    let workers = match std::env::var("PARTEXP_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Failure::Usage(format!("PARTEXP_WORKERS must be a positive integer, got '{v}'")))?,
        Err(_) => a.workers,
    };
    if workers == 0 {
        return Err(Failure::Usage("worker count must be at least 1".into()));
    }
    let methods = a
        .method
        .iter()
        .map(|m| load_tableau(m).and_then(|t| Method::new(t).map_err(Failure::from)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|f| match f {
            Failure::Usage(msg) => Failure::Usage(msg),
            Failure::Numerical(msg) => Failure::Usage(msg),
        })?;
    let params = ProblemParams {
        size: a.size,
        seed: a.seed,
        paper_scale: a.paper_scale,
    };
    let ivp = problems::build(&a.problem, &params).map_err(|e| match e {
        Error::UnknownProblem { .. } | Error::Contract(_) => Failure::Usage(e.to_string()),
        other => Failure::Numerical(other.to_string()),
    })?;
    for m in &methods {
        if m.partitions() > 1 && m.partitions() != ivp.num_partitions() {
            return Err(Failure::Usage(format!(
                "{} has {} partitions but {} has {}",
                m.name(),
                m.partitions(),
                ivp.name,
                ivp.num_partitions()
            )));
        }
    }
    let pool = if workers > 1 {
        let p = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Failure::Usage(format!("cannot start {workers} workers: {e}")))?;
        Some(Arc::new(p))
    } else {
        None
    };
    let (sink, to_stdout): (Box<dyn Write>, bool) = match &a.out {
        Some(p) => (Box::new(File::create(p).map_err(io_failure)?), false),
        None => (Box::new(io::stdout()), true),
    };
    Ok(Study {
        methods,
        ivp,
        opts: StudyOptions {
            seed: a.seed,
            no_timing: a.no_timing,
            pool,
        },
        sink,
        to_stdout,
    })
}

impl Study {
    fn header(&mut self) -> Result<(), Failure> {
        writeln!(self.sink, "{CSV_HEADER}").map_err(io_failure)?;
        self.sink.flush().map_err(io_failure)
    }

    fn emit(&mut self, rows: &[StudyRow]) -> Result<(), Failure> {
        append_csv(&mut self.sink, rows)?;
        self.sink.flush().map_err(io_failure)
    }

    fn say(&self, line: &str) {
        if self.to_stdout {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }
}

fn reference(ivp: &partexp::integrators::PartitionedIvp, finest_h: f64) -> Result<Vec<f64>, Failure> {
    reference_solution(ivp, finest_h).map_err(|e| Failure::Numerical(format!("reference solution failed: {e}")))
}

fn run_fixed(a: &FixedArgs) -> Result<(), Failure> {
    let h_list = parse_geometric(&a.h_seq)?;
    let mut study = prepare(&a.study)?;
    let finest = a.ref_h.unwrap_or_else(|| h_list.iter().copied().fold(f64::INFINITY, f64::min));
    if !(finest > 0.0) {
        return Err(Failure::Usage("--ref-h must be positive".into()));
    }
    study.header()?;
    let reference = reference(&study.ivp, finest)?;
    let mut failed = 0;
    for method in std::mem::take(&mut study.methods) {
        let res = convergence_study(&method, &study.ivp, &h_list, &reference, &study.opts);
        study.emit(&res.rows)?;
        failed += res.rows.iter().filter(|r| r.status == Status::Failed).count();
        let line = match &res.slope {
            Ok(fit) => format!(
                "slope {} {}: {:.3} (rows {}..{})",
                method.name(),
                study.ivp.name,
                fit.slope,
                fit.start + 1,
                fit.start + fit.len
            ),
            Err(why) => format!("slope {} {}: unavailable ({why})", method.name(), study.ivp.name),
        };
        study.say(&line);
    }
    finish(failed)
}

fn run_adaptive(a: &AdaptiveArgs) -> Result<(), Failure> {
    let tols = match &a.tol_seq {
        Some(s) => parse_geometric(s)?,
        None => a.tols.clone(),
    };
    if tols.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Failure::Usage("tolerances must be positive and finite".into()));
    }
    let mut study = prepare(&a.study)?;
    let finest = a.ref_h.unwrap_or(1e-3 * (study.ivp.tf - study.ivp.t0));
    if !(finest > 0.0) {
        return Err(Failure::Usage("--ref-h must be positive".into()));
    }
    study.header()?;
    let reference = reference(&study.ivp, finest)?;
    let mut failed = 0;
    for method in std::mem::take(&mut study.methods) {
        if !method.tableau().has_embedded() {
            return Err(Failure::Usage(format!("{} has no embedded method", method.name())));
        }
        let rows = work_precision_study(&method, &study.ivp, &tols, &reference, &study.opts);
        study.emit(&rows)?;
        failed += rows.iter().filter(|r| r.status == Status::Failed).count();
    }
    finish(failed)
}

fn finish(failed: usize) -> Result<(), Failure> {
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("{failed} run(s) failed")))
    }
}
