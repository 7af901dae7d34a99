//! Command-line driver: integration jobs, sampling baselines, self tests,
//! and growth-rate estimation from stored results.
//!
//! Every run writes a JSON summary embedding the full configuration and
//! seed; integration runs also write the per-sweep convergence log as
//! CSV, baselines a CSV with one row per ladder size. The default output
//! directory comes from `TTQUAD_OUT_DIR` (falling back to the working
//! directory).
//!
//! Exit codes: 0 success, 1 invalid configuration or runtime failure,
//! 2 usage error or budget exhausted before convergence, 3 self-test
//! failure.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;
use ttquad::quadrature::Integrand;
use ttquad::{
    fit_loglog, integrate, mc_batch, qmc_integrate, CrossConfig, EstimateBatch, IntegrateConfig,
    IsingProblem, LatticeRule, ScaledValue, SweepStrategy,
};

const EXIT_BUDGET: i32 = 2;
const EXIT_SELFTEST: i32 = 3;

#[derive(Parser)]
#[command(name = "ttquad", version, about = "Tensor-train quadrature driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a problem with adaptive cross interpolation.
    Integrate(IntegrateArgs),
    /// Monte Carlo baseline over a ladder of point counts.
    BaselineMc(BaselineArgs),
    /// Shifted-lattice baseline over a ladder of point counts.
    BaselineQmc(QmcArgs),
    /// Run the built-in invariant checks.
    Selftest,
    /// Growth-rate estimate from two stored integration summaries.
    Delta(DeltaArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Problem {
    /// C family of the susceptibility integrals.
    IsingC,
    /// D family.
    IsingD,
    /// E family.
    IsingE,
    /// Built-in smoke test: exp(x_1+..+x_d)/(e-1)^d, integral exactly 1.
    ExpMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
enum Strategy {
    /// Rank-adaptive greedy pivot expansion.
    Greedy,
    /// Rank-adaptive superblock sweeps (dense per-interface SVD).
    Dmrg,
    /// Fixed-rank alternating maxvol re-selection.
    Als,
}

impl Strategy {
    fn to_sweep(self, tol: f64) -> SweepStrategy {
        match self {
            Strategy::Greedy => SweepStrategy::Greedy,
            Strategy::Dmrg => SweepStrategy::Dmrg { eps: tol },
            Strategy::Als => SweepStrategy::Als,
        }
    }
}

#[derive(Args, Serialize)]
struct ProblemArgs {
    /// Problem to integrate.
    #[arg(long, value_enum)]
    problem: Problem,
    /// Integral label d (the integration dimension is d-1), or the
    /// dimension itself for built-in test functions.
    #[arg(long)]
    d: usize,
}

#[derive(Args, Serialize)]
struct OutputArgs {
    /// Output directory; defaults to TTQUAD_OUT_DIR or the working
    /// directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Basename for the artifacts; derived from the job when absent.
    #[arg(long)]
    tag: Option<String>,
}

#[derive(Args, Serialize)]
struct IntegrateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Quadrature nodes per mode.
    #[arg(long, default_value_t = 33)]
    n: usize,
    /// Relative internal convergence tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Strategy::Greedy)]
    strategy: Strategy,
    /// Rank cap per interface.
    #[arg(long, default_value_t = 64)]
    max_rank: usize,
    /// Sweep budget.
    #[arg(long, default_value_t = 60)]
    max_sweeps: usize,
    /// Oracle evaluation budget.
    #[arg(long, default_value_t = 10_000_000)]
    max_evals: u64,
    /// Dimension-parallel workers P.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Interpolate the raw tensor instead of the weight-folded one.
    #[arg(long)]
    no_fold: bool,
    /// Evaluator threads T per worker (reported in core-hours).
    #[arg(long, default_value_t = 1)]
    evaluators: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct BaselineArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Smallest point count of the ladder; rounded up to a power of two.
    #[arg(long, default_value_t = 1024)]
    n_from: u64,
    /// Largest point count of the ladder.
    #[arg(long, default_value_t = 262_144)]
    n_to: u64,
    /// Independent replicates per ladder rung.
    #[arg(long, default_value_t = 16)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct QmcArgs {
    #[command(flatten)]
    baseline: BaselineArgs,
    /// Lattice rule file (optional `# dim=<D> n=<N>` header, one
    /// component per line).
    #[arg(long)]
    lattice: PathBuf,
}

#[derive(Args, Serialize)]
struct DeltaArgs {
    /// Stored integration summary for the smaller label a.
    #[arg(long)]
    a: PathBuf,
    /// Stored integration summary for the larger label b.
    #[arg(long)]
    b: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Integrate(args) => cmd_integrate(args),
        Command::BaselineMc(args) => cmd_baseline(args, None),
        Command::BaselineQmc(args) => {
            let lattice = args.lattice.clone();
            cmd_baseline(args.baseline, Some(lattice))
        }
        Command::Selftest => cmd_selftest(),
        Command::Delta(args) => cmd_delta(args),
    }
}

fn out_dir(args: &OutputArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os("TTQUAD_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn problem_label(p: Problem) -> &'static str {
    match p {
        Problem::IsingC => "ising-c",
        Problem::IsingD => "ising-d",
        Problem::IsingE => "ising-e",
        Problem::ExpMean => "exp-mean",
    }
}

/// The integrand, its integration dimension, and the known exact value
/// for built-in test functions.
fn ising_family(problem: Problem) -> Option<ttquad::Family> {
    match problem {
        Problem::IsingC => Some(ttquad::Family::C),
        Problem::IsingD => Some(ttquad::Family::D),
        Problem::IsingE => Some(ttquad::Family::E),
        Problem::ExpMean => None,
    }
}

fn resolve_problem(args: &ProblemArgs, n: usize) -> Result<(Integrand, usize, Option<f64>)> {
    match ising_family(args.problem) {
        None => {
            if args.d == 0 {
                bail!("built-in test functions need d >= 1");
            }
            let d = args.d;
            let scale = ((1.0f64).exp() - 1.0).powi(d as i32);
            let f = Integrand::plain(move |x: &[f64]| {
                (x.iter().sum::<f64>()).exp() / scale
            });
            Ok((f, d, Some(1.0)))
        }
        Some(family) => {
            let problem = IsingProblem::new(family, args.d)?;
            let grid = ttquad::QuadratureGrid::uniform(problem.integration_dim(), n)?;
            let (integrand, _) = problem.auto_integrand(&grid)?;
            Ok((integrand, problem.integration_dim(), None))
        }
    }
}

#[derive(Serialize)]
struct IntegrateSummary<'a> {
    command: &'static str,
    problem: &'static str,
    d: usize,
    integration_dim: usize,
    config: &'a IntegrateConfig,
    evaluators: usize,
    estimate: f64,
    exponent_offset: f64,
    ln_abs: f64,
    n_eval: u64,
    converged: bool,
    max_rank_reached: usize,
    warnings: &'a [String],
    wall_s: f64,
    core_hours: f64,
    csv: String,
}

fn cmd_integrate(args: IntegrateArgs) -> Result<i32> {
    let (integrand, dim, exact) = resolve_problem(&args.problem, args.n)?;
    let mut config = IntegrateConfig::new(dim, args.n);
    config.strategy = args.strategy.to_sweep(args.tol);
    config.rel_tol = args.tol;
    config.max_rank = args.max_rank;
    config.max_sweeps = args.max_sweeps;
    config.max_evals = Some(args.max_evals);
    config.workers = args.workers;
    config.seed = args.seed;
    config.fold = !args.no_fold;
    if args.evaluators == 0 {
        bail!("evaluators must be at least 1");
    }

    let start = Instant::now();
    let result = integrate(&integrand, &config)?;
    let wall_s = start.elapsed().as_secs_f64();

    let dir = out_dir(&args.output);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let tag = args.output.tag.clone().unwrap_or_else(|| {
        format!(
            "integrate_{}_d{}_n{}",
            problem_label(args.problem.problem),
            args.problem.d,
            args.n
        )
    });
    let csv_path = dir.join(format!("{tag}.csv"));
    let file = std::fs::File::create(&csv_path)
        .with_context(|| format!("creating {}", csv_path.display()))?;
    result
        .log
        .write_csv(file)
        .with_context(|| format!("writing {}", csv_path.display()))?;

    let core_hours = wall_s * (args.workers * args.evaluators) as f64 / 3600.0;
    let summary = IntegrateSummary {
        command: "integrate",
        problem: problem_label(args.problem.problem),
        d: args.problem.d,
        integration_dim: dim,
        config: &config,
        evaluators: args.evaluators,
        estimate: result.estimate,
        exponent_offset: result.exponent_offset,
        ln_abs: result.ln_abs(),
        n_eval: result.n_eval,
        converged: result.converged,
        max_rank_reached: result.ranks.iter().copied().max().unwrap_or(1),
        warnings: &result.warnings,
        wall_s,
        core_hours,
        csv: csv_path.display().to_string(),
    };
    let json_path = dir.join(format!("{tag}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", json_path.display()))?;

    println!(
        "estimate {:.17e} (exponent offset {:+}), {} evaluations, converged: {}",
        summary.estimate, summary.exponent_offset, summary.n_eval, summary.converged
    );
    if let Some(truth) = exact {
        println!(
            "known exact value {truth}; relative error {:.3e}",
            ((summary.estimate - truth) / truth).abs()
        );
    }
    for w in summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("summary {} log {}", json_path.display(), csv_path.display());
    Ok(if result.converged { 0 } else { EXIT_BUDGET })
}

#[derive(Serialize)]
struct LadderRung {
    n_eval: u64,
    mean: f64,
    rel_std: f64,
    std_is_absolute: bool,
    wall_s: f64,
}

#[derive(Serialize)]
struct BaselineSummary<'a> {
    command: &'static str,
    method: &'static str,
    problem: &'static str,
    d: usize,
    integration_dim: usize,
    reps: u64,
    seed: u64,
    lattice: Option<String>,
    rungs: &'a [LadderRung],
    slope: Option<f64>,
    intercept: Option<f64>,
    csv: String,
}

/// Smallest ln of the integrand at the domain center for which direct
/// sampling stays meaningful: sample variances square the values, so they
/// must sit above half the double-precision exponent floor.
const BASELINE_LN_FLOOR: f64 = -354.0;

fn cmd_baseline(args: BaselineArgs, lattice: Option<PathBuf>) -> Result<i32> {
    let (integrand, dim, _) = resolve_problem(&args.problem, 2)?;
    let Integrand::Plain(f) = &integrand else {
        bail!(
            "the sampling baselines evaluate the integrand directly and need a \
             problem that fits double precision"
        );
    };
    if let Some(family) = ising_family(args.problem.problem) {
        let problem = IsingProblem::new(family, args.problem.d)?;
        let center = vec![0.5; problem.integration_dim()];
        let ln_center = problem.ln_integrand(&center);
        if ln_center < BASELINE_LN_FLOOR {
            bail!(
                "this problem is too small for direct sampling: ln of the integrand \
                 at the domain center is {ln_center:.1}, below the {BASELINE_LN_FLOOR} \
                 floor where sample variances underflow double precision; use the \
                 integrate command, which switches to log-scaled evaluation"
            );
        }
    }
    let method = if lattice.is_some() { "qmc" } else { "mc" };
    let rule = lattice
        .as_ref()
        .map(|path| {
            LatticeRule::from_file(path)
                .with_context(|| format!("loading lattice rule {}", path.display()))
        })
        .transpose()?;

    if args.n_from == 0 || args.n_to < args.n_from {
        bail!("ladder needs 0 < n-from <= n-to");
    }
    let mut n = args.n_from.next_power_of_two();
    let mut rungs = Vec::new();
    while n <= args.n_to {
        let start = Instant::now();
        let batch: EstimateBatch = match &rule {
            Some(rule) => qmc_integrate(f.as_ref(), rule, dim, n, args.reps, args.seed)?,
            None => mc_batch(f.as_ref(), dim, n, args.reps, args.seed)?,
        };
        rungs.push(LadderRung {
            n_eval: n * args.reps,
            mean: batch.mean,
            rel_std: batch.rel_std,
            std_is_absolute: batch.std_is_absolute,
            wall_s: start.elapsed().as_secs_f64(),
        });
        n *= 2;
    }
    if rungs.is_empty() {
        bail!("ladder is empty; raise n-to");
    }

    let xs: Vec<f64> = rungs.iter().map(|r| r.n_eval as f64).collect();
    let ys: Vec<f64> = rungs.iter().map(|r| r.rel_std).collect();
    let fit = fit_loglog(&xs, &ys).ok();

    let dir = out_dir(&args.output);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let tag = args.output.tag.clone().unwrap_or_else(|| {
        format!(
            "baseline-{method}_{}_d{}",
            problem_label(args.problem.problem),
            args.problem.d
        )
    });
    let csv_path = dir.join(format!("{tag}.csv"));
    let mut csv = String::from("method,n_eval,mean,rel_std,wall_s\n");
    for r in &rungs {
        csv.push_str(&format!(
            "{method},{},{:.17e},{:.6e},{:.6}\n",
            r.n_eval, r.mean, r.rel_std, r.wall_s
        ));
    }
    std::fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;

    let summary = BaselineSummary {
        command: "baseline",
        method,
        problem: problem_label(args.problem.problem),
        d: args.problem.d,
        integration_dim: dim,
        reps: args.reps,
        seed: args.seed,
        lattice: lattice.as_ref().map(|p| p.display().to_string()),
        rungs: &rungs,
        slope: fit.map(|(s, _)| s),
        intercept: fit.map(|(_, i)| i),
        csv: csv_path.display().to_string(),
    };
    let json_path = dir.join(format!("{tag}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", json_path.display()))?;

    match fit {
        Some((slope, _)) => println!(
            "{method}: {} rungs, fitted log-log slope {slope:.4}",
            rungs.len()
        ),
        None => println!("{method}: {} rungs, slope not fitted", rungs.len()),
    }
    println!("summary {} log {}", json_path.display(), csv_path.display());
    Ok(0)
}

fn cmd_selftest() -> Result<i32> {
    let mut failures = 0u32;
    let mut check = |name: &str, ok: bool| {
        println!("[{}] {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let gl = (1..=64usize).all(|n| match ttquad::gauss_legendre(n) {
        Ok((nodes, weights)) => (0..2 * n - 1).all(|k| {
            let q: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(t, w)| w * t.powi(k as i32))
                .sum();
            (q - 1.0 / (k as f64 + 1.0)).abs() <= 1e-14
        }),
        Err(_) => false,
    });
    check("Gauss-Legendre rules integrate monomials to degree 2n-1", gl);

    let closed_forms = [
        (ttquad::Family::C, 1.0),
        (ttquad::Family::D, 1.0 / 3.0),
        (ttquad::Family::E, 6.0 - 8.0 * (2.0f64).ln()),
    ]
    .iter()
    .all(|&(family, truth)| {
        let problem = IsingProblem::new(family, 2).expect("valid label");
        let integrand = problem.to_integrand(ttquad::ising::EvalMode::Direct);
        let mut config = IntegrateConfig::new(1, 33);
        config.rel_tol = 1e-12;
        match integrate(&integrand, &config) {
            Ok(result) => ((result.estimate - truth) / truth).abs() <= 1e-11,
            Err(_) => false,
        }
    });
    check("closed-form two-dimensional integrals through the pipeline", closed_forms);

    let cross = {
        let dims = vec![5usize; 5];
        let seeds = [3u64, 11];
        seeds.iter().all(|&seed| {
            let f = ttquad::FunctionOracle::new(&dims, std::sync::Arc::new(move |idx| {
                let s: f64 = idx.entries().map(|e| e as f64).sum();
                (0.37 * s + seed as f64).sin() + 2.0
            }))
            .expect("valid dims");
            let mut config = CrossConfig::default();
            config.seed = seed;
            config.rel_tol = 1e-11;
            match ttquad::cross_interpolate(&f, &config) {
                Ok(result) => result.report.converged,
                Err(_) => false,
            }
        })
    };
    check("greedy cross interpolation converges on smooth five-mode tensors", cross);

    if failures == 0 {
        println!("all checks passed");
        Ok(0)
    } else {
        println!("{failures} check(s) failed");
        Ok(EXIT_SELFTEST)
    }
}

fn cmd_delta(args: DeltaArgs) -> Result<i32> {
    let load = |path: &Path| -> Result<(ScaledValue, usize)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let json: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let estimate = json
            .get("estimate")
            .and_then(|v| v.as_f64())
            .with_context(|| format!("{} has no numeric estimate field", path.display()))?;
        let offset = json
            .get("exponent_offset")
            .and_then(|v| v.as_f64())
            .unwrap_or(0.0);
        let d = json
            .get("d")
            .and_then(|v| v.as_u64())
            .with_context(|| format!("{} has no integral label d", path.display()))?;
        Ok((ScaledValue::new(estimate, offset), d as usize))
    };
    let (value_a, label_a) = load(&args.a)?;
    let (value_b, label_b) = load(&args.b)?;
    let delta = ttquad::delta_estimate(value_a, label_a, value_b, label_b)?;
    let summary = serde_json::json!({
        "command": "delta",
        "a": { "path": args.a.display().to_string(), "d": label_a },
        "b": { "path": args.b.display().to_string(), "d": label_b },
        "delta": delta,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}
