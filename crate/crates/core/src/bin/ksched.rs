use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use ksched::curvature::{curvature_bruteforce, CurvatureReport};
use ksched::experiments::{self, ExperimentConfig, ExperimentKind, ExperimentReport};
use ksched::kalman::{step_problems, Policy};
use ksched::model::{generate_instance, load_instance, save_instance, MeasurementGeneratorSpec, SelectionFile, StepProblem};
use ksched::objective::f_direct;
use ksched::uav::UavConfig;

#[derive(Parser)]
#[command(name = "ksched", version, about = "Budgeted sensor scheduling for Kalman filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance and its first step problem.
    Gen(GenArgs),
    /// Fixed-budget tracking study.
    Run(RunArgs),
    /// Tracking study over a range of budgets.
    Sweep(RunArgs),
    /// Repeated randomized greedy on one step problem.
    Hist(RunArgs),
    /// Selection time and MSE as the problem is scaled up.
    Scale(RunArgs),
    /// Brute-force curvature of a small step problem.
    Curv(CurvArgs),
    /// UAV multi-object tracking scenario.
    Uav(UavArgs),
    /// Score a selection file against a step problem.
    Score(ScoreArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Gaussian,
    Bernoulli,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 50)]
    m: usize,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 55)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 0.05)]
    q_var: f64,
    #[arg(long, default_value_t = 0.05)]
    r_var: f64,
    #[arg(long, value_enum, default_value_t = Generator::Gaussian)]
    generator: Generator,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Comma-separated epsilon values.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Fail on timing checks too.
    #[arg(long)]
    assert_perf: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated: greedy, randomized, random, exhaustive, all.
    /// `randomized` expands to one policy per `--eps` value.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    /// Largest scale factor of `scale` (powers of two from 1).
    #[arg(long)]
    gamma_max: Option<usize>,
    /// Comma-separated budgets of `sweep`.
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    /// Write each step problem of trial 0, per policy, under this directory.
    #[arg(long)]
    dump_steps: Option<PathBuf>,
}

#[derive(Args)]
struct CurvArgs {
    /// Step problem file; a random one is generated when absent.
    #[arg(long)]
    step: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct UavArgs {
    #[command(flatten)]
    common: Common,
    /// JSON scenario config; unspecified fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    step: PathBuf,
    #[arg(long)]
    selection: PathBuf,
}

#[derive(Serialize)]
struct Score {
    step: usize,
    #[serde(rename = "K")]
    k: usize,
    selected: Vec<usize>,
    f_value: f64,
    mse: f64,
    trace_p_pred: f64,
}

fn parse_policies(names: &[String], eps: &[f64]) -> anyhow::Result<Vec<Policy>> {
    let mut out = Vec::new();
    for name in names {
        match name.trim() {
            "greedy" => out.push(Policy::Greedy),
            "random" => out.push(Policy::Random),
            "exhaustive" => out.push(Policy::Exhaustive),
            "all" => out.push(Policy::AllSensors),
            "randomized" => out.extend(eps.iter().map(|&e| Policy::randomized(e))),
            other => bail!("unknown policy {other:?}"),
        }
    }
    Ok(out)
}

fn apply_common(cfg: &mut ExperimentConfig, c: &Common) {
    if let Some(v) = c.m {
        cfg.m = v;
    }
    if let Some(v) = c.n {
        cfg.n = v;
    }
    if let Some(v) = c.k {
        cfg.k = v;
    }
    if let Some(v) = c.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = &c.eps {
        cfg.eps = v.clone();
    }
    if let Some(v) = c.trials {
        cfg.trials = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
}

fn experiment_config(kind: ExperimentKind, args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::preset(kind);
    apply_common(&mut cfg, &args.common);
    match &args.policies {
        Some(names) => cfg.policies = parse_policies(names, &cfg.eps)?,
        None if args.common.eps.is_some() && cfg.policies.iter().any(|p| p.epsilon().is_some()) => {
            cfg.policies.retain(|p| p.epsilon().is_none());
            cfg.policies.extend(cfg.eps.iter().map(|&e| Policy::randomized(e)));
        }
        None => {}
    }
    if let Some(g) = args.gamma_max {
        cfg.gammas = std::iter::successors(Some(1usize), |g| g.checked_mul(2))
            .take_while(|x| *x <= g)
            .collect();
    }
    if let Some(b) = &args.budgets {
        cfg.budgets = b.clone();
    }
    Ok(cfg)
}

fn finish(report: &ExperimentReport, out: &Path, assert_perf: bool) -> anyhow::Result<bool> {
    report
        .write_to(out)
        .with_context(|| format!("writing results to {}", out.display()))?;
    for c in &report.checks {
        let tag = match (c.passed, c.perf && !assert_perf) {
            (true, _) => "PASS",
            (false, true) => "WARN",
            (false, false) => "FAIL",
        };
        println!("{tag} {}: {}", c.name, c.detail);
    }
    println!("wrote {}", out.display());
    Ok(report.passed(assert_perf))
}

fn run_experiment(kind: ExperimentKind, args: &RunArgs) -> anyhow::Result<bool> {
    let cfg = experiment_config(kind, args)?;
    if let Some(dir) = &args.dump_steps {
        dump_steps(&cfg, dir)?;
    }
    let report = experiments::run(&cfg)?;
    finish(&report, &args.common.out, args.common.assert_perf)
}

fn dump_steps(cfg: &ExperimentConfig, dir: &Path) -> anyhow::Result<()> {
    let inst = generate_instance(
        MeasurementGeneratorSpec::gaussian(cfg.m),
        cfg.m,
        cfg.n,
        cfg.k,
        cfg.horizon,
        cfg.q_var,
        cfg.r_var,
        cfg.seed,
    )?;
    for policy in &cfg.policies {
        let sub = dir.join(policy.stream_tag().replace(':', "-"));
        fs::create_dir_all(&sub)?;
        save_instance(&inst, sub.join("instance.json"))?;
        for step in step_problems(&inst, policy, cfg.seed)? {
            step.save(sub.join(format!("step_{:03}.json", step.step)))?;
        }
    }
    Ok(())
}

fn gen(args: &GenArgs) -> anyhow::Result<bool> {
    let spec = match args.generator {
        Generator::Gaussian => MeasurementGeneratorSpec::gaussian(args.m),
        Generator::Bernoulli => MeasurementGeneratorSpec::bernoulli(args.m),
    };
    let inst = generate_instance(spec, args.m, args.n, args.k, args.horizon, args.q_var, args.r_var, args.seed)?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("instance.json");
    save_instance(&inst, &path)?;
    // reload so the written file is known to be readable
    let inst = load_instance(&path)?;
    let first = step_problems(&inst.with_budget(inst.k)?, &Policy::Greedy, args.seed)?
        .into_iter()
        .next()
        .context("instance has an empty horizon")?;
    first.save(args.out.join("step_000.json"))?;
    println!("wrote {} and step_000.json", path.display());
    Ok(true)
}

fn curv(args: &CurvArgs) -> anyhow::Result<bool> {
    let step = match &args.step {
        Some(p) => StepProblem::load(p)?,
        None => {
            let inst = generate_instance(
                MeasurementGeneratorSpec::gaussian(args.m),
                args.m,
                args.n,
                args.k,
                1,
                0.05,
                0.05,
                args.seed,
            )?;
            StepProblem {
                step: 0,
                k: args.k,
                p_pred: &inst.sigma_x + &inst.q,
                h: inst.h[0].clone(),
                r_diag: inst.r_diag.clone(),
            }
        }
    };
    let report: CurvatureReport = curvature_bruteforce(&step.p_pred, &step.h, &step.r_diag)?
        .with_factor(args.eps, step.h.nrows(), step.k)?;
    let json = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(p) => fs::write(p, &json)?,
        None => println!("{json}"),
    }
    Ok(true)
}

fn uav(args: &UavArgs) -> anyhow::Result<bool> {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::Uav);
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.uav = serde_json::from_str::<UavConfig>(&text)?;
    }
    apply_common(&mut cfg, &args.common);
    if let Some(k) = args.common.k {
        cfg.uav.budget = k;
    }
    if let Some(h) = args.common.horizon {
        cfg.uav.horizon = h;
    }
    cfg.uav.validate()?;
    let report = experiments::run(&cfg)?;
    finish(&report, &args.common.out, args.common.assert_perf)
}

fn score(args: &ScoreArgs) -> anyhow::Result<bool> {
    let step = StepProblem::load(&args.step)?;
    let sel = SelectionFile::load(&args.selection)?;
    let n = step.h.nrows();
    let mut seen = vec![false; n];
    for &j in &sel.selected {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            bail!("selection index {j} is out of range or repeated (n = {n})");
        }
    }
    let f_value = f_direct(&step.p_pred, &step.h, &step.r_diag, &sel.selected)?;
    let trace_p_pred = trace(&step.p_pred);
    let out = Score {
        step: sel.step,
        k: sel.k,
        selected: sel.selected,
        f_value,
        mse: trace_p_pred - f_value,
        trace_p_pred,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(true)
}

fn trace(p: &DMatrix<f64>) -> f64 {
    p.diagonal().sum()
}

fn configure_workers() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("KSCHED_WORKERS") {
        let n: usize = v.parse().with_context(|| format!("KSCHED_WORKERS={v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers().and_then(|()| match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run_experiment(ExperimentKind::Tracking, a),
        Command::Sweep(a) => run_experiment(ExperimentKind::BudgetSweep, a),
        Command::Hist(a) => run_experiment(ExperimentKind::Histogram, a),
        Command::Scale(a) => run_experiment(ExperimentKind::Scaling, a),
        Command::Curv(a) => curv(a),
        Command::Uav(a) => uav(a),
        Command::Score(a) => score(a),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
