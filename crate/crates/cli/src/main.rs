use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use vr3pm::harness::io::{read_instance, write_instance};
use vr3pm::harness::{fit_rate, probe_regularity_in, run_experiment, ExperimentConfig};
use vr3pm::instances::{solve_reference, Family, GeneratorSpec};
use vr3pm::solvers::{run, Algorithm, Budget, SolverConfig, StepSchedule};
use vr3pm::trace::{read_csv, Metric};
use vr3pm::{Error, Result, SimpleSet};

#[derive(Parser)]
#[command(name = "vr3pm", version, about = "Random relaxed projection solvers and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded LCQP or QCQP instance.
    Generate(GenerateArgs),
    /// Solve an instance to high accuracy and store the reference optimum.
    Reference(ReferenceArgs),
    /// Run one solver on one instance.
    Solve(SolveArgs),
    /// Run a multi-seed comparison from a JSON config.
    Compare(CompareArgs),
    /// Fit a log-log rate to a trace CSV.
    Rates(RatesArgs),
    /// Estimate the regularity constant of an instance by sampling.
    Probe(ProbeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Lcqp,
    Qcqp,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also solve for and store the reference optimum.
    #[arg(long)]
    with_reference: bool,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReferenceArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Where to write the instance with its reference; defaults to
    /// overwriting the input.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Solver config JSON; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "budget_grads")]
    iterations: Option<usize>,
    #[arg(long)]
    budget_grads: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    grouping: Option<usize>,
    /// Power schedule base/(k+1)^exponent.
    #[arg(long)]
    step_base: Option<f64>,
    #[arg(long)]
    step_exponent: Option<f64>,
    /// Trace CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    budget_grads: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "f_gap_average")]
    metric: Metric,
    #[arg(long)]
    k_lo: Option<usize>,
    #[arg(long)]
    k_hi: Option<usize>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict samples to [lower, upper]^d.
    #[arg(long, requires = "box_upper", allow_hyphen_values = true)]
    box_lower: Option<f64>,
    #[arg(long, requires = "box_lower", allow_hyphen_values = true)]
    box_upper: Option<f64>,
}

fn print(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut spec = match a.family {
        FamilyArg::Lcqp => GeneratorSpec::lcqp(a.n, a.m, a.d, a.p, a.seed),
        FamilyArg::Qcqp => GeneratorSpec::qcqp(a.n, a.m, a.d, a.p, a.q.unwrap_or(0), a.seed),
    };
    if spec.family == Family::Lcqp {
        spec.q = a.q;
    }
    let mut inst = spec.generate()?;
    let mut reference = None;
    if a.with_reference {
        let sol = solve_reference(&inst, a.tol)?;
        inst = inst.with_reference(sol.record())?;
        reference = Some(sol);
    }
    write_instance(&inst, &a.out)?;
    print(&json!({
        "path": a.out,
        "fingerprint": format!("{:016x}", inst.fingerprint()),
        "reference": reference,
    }))
}

fn reference(a: ReferenceArgs) -> Result<()> {
    let inst = read_instance(&a.instance)?;
    let sol = solve_reference(&inst, a.tol)?;
    let inst = inst.with_reference(sol.record())?;
    write_instance(&inst, a.out.as_ref().unwrap_or(&a.instance))?;
    print(&sol)
}

fn solve(a: SolveArgs) -> Result<()> {
    let inst = read_instance(&a.instance)?;
    let mut config = match &a.config {
        Some(path) => serde_json::from_str::<SolverConfig>(&std::fs::read_to_string(path)?)?,
        None => {
            let alg = a
                .algorithm
                .ok_or_else(|| Error::Argument("--algorithm is required without --config".into()))?;
            SolverConfig::new(alg, StepSchedule::empirical_default(), Budget::Iterations(1000))
        }
    };
    if let Some(alg) = a.algorithm {
        config.algorithm = alg;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(k) = a.iterations {
        config.budget = Budget::Iterations(k);
    }
    if let Some(g) = a.budget_grads {
        config.budget = Budget::GradEvals(g);
    }
    if let Some(b) = a.batch {
        config.batch = b;
    }
    if let Some(g) = a.grouping {
        config.grouping = Some(g);
    }
    if a.step_base.is_some() || a.step_exponent.is_some() {
        let (base, exponent) = match config.schedule {
            StepSchedule::Power { base, exponent } => (base, exponent),
            _ => (0.01, 0.55),
        };
        config.schedule = StepSchedule::Power {
            base: a.step_base.unwrap_or(base),
            exponent: a.step_exponent.unwrap_or(exponent),
        };
    }
    let (trace, diverged) = match run(&inst, &config) {
        Ok(t) => (t, None),
        Err(Error::RunDiverged { iteration, trace }) => (*trace, Some(iteration)),
        Err(e) => return Err(e),
    };
    if let Some(path) = &a.out {
        trace.write_csv(path)?;
    }
    print(&json!({ "header": trace.header, "summary": trace.summary }))?;
    match diverged {
        Some(iteration) => Err(Error::Divergence {
            iteration,
            last_finite: vr3pm::DenseVector::from_vec(trace.summary.final_iterate.clone()),
        }),
        None => Ok(()),
    }
}

fn compare(a: CompareArgs) -> Result<()> {
    let mut config = ExperimentConfig::read(&a.config)?;
    if let Some(seeds) = a.seeds {
        config.seeds = seeds;
    }
    if let Some(g) = a.budget_grads {
        config.budget = Budget::GradEvals(g);
    }
    if let Some(out) = a.out {
        config.out_dir = Some(out);
    }
    let outcome = run_experiment(&config)?;
    print(&outcome.summary.algorithms)
}

fn rates(a: RatesArgs) -> Result<()> {
    let rows = read_csv(&a.trace)?;
    let last = rows.last().map(|r| r.iter).unwrap_or(0);
    let lo = a.k_lo.unwrap_or((last / 100).max(1));
    let hi = a.k_hi.unwrap_or(last);
    let fit = fit_rate(&rows, a.metric, (lo, hi))?;
    print(&json!({ "metric": a.metric.name(), "window": [lo, hi], "fit": fit }))
}

fn probe(a: ProbeArgs) -> Result<()> {
    let inst = read_instance(&a.instance)?;
    let region = match (a.box_lower, a.box_upper) {
        (Some(lo), Some(hi)) => {
            let d = inst.dimension();
            Some(SimpleSet::boxed(
                vr3pm::DenseVector::from_element(d, lo),
                vr3pm::DenseVector::from_element(d, hi),
            )?)
        }
        _ => None,
    };
    print(&probe_regularity_in(&inst, a.samples, a.seed, region.as_ref())?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Reference(a) => reference(a),
        Command::Solve(a) => solve(a),
        Command::Compare(a) => compare(a),
        Command::Rates(a) => rates(a),
        Command::Probe(a) => probe(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::FAILURE
        }
    }
}
