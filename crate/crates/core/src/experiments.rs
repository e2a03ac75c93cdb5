//! Monte-Carlo experiment drivers and their CSV/JSON output.
//!
//! Every experiment produces long-format [`Record`]s, a per-group
//! [`SummaryRow`] table and a list of [`Check`]s. Checks marked `perf` compare
//! wall-clock timings and only gate the exit status when asked to.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::{run_filter_on, simulate_world, Policy};
use crate::model::{generate_instance, MeasurementGeneratorSpec, ProblemInstance};
use crate::objective::SensorRows;
use crate::rng::{derive_seed, substream};
use crate::selection::{greedy_select_rows, randomized_greedy_select_rows, SamplingConfig};
use crate::uav::{run_scenario, UavConfig};

/// Column order of the records CSV.
pub const RECORD_COLUMNS: [&str; 13] = [
    "experiment",
    "policy",
    "eps",
    "gamma",
    "trial",
    "step",
    "K",
    "mse",
    "f_value",
    "gain_evals",
    "select_time_s",
    "sq_error",
    "filter_time_s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Tracking,
    BudgetSweep,
    Histogram,
    Scaling,
    Uav,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Tracking => "tracking",
            ExperimentKind::BudgetSweep => "budget-sweep",
            ExperimentKind::Histogram => "histogram",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Uav => "uav",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub horizon: usize,
    pub eps: Vec<f64>,
    /// Budgets of the sweep.
    pub budgets: Vec<usize>,
    /// Scale factors of the scaling study.
    pub gammas: Vec<usize>,
    pub trials: usize,
    pub policies: Vec<Policy>,
    pub q_var: f64,
    pub r_var: f64,
    pub seed: u64,
    pub uav: UavConfig,
}

impl ExperimentConfig {
    /// Defaults of each experiment kind.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            m: 50,
            n: 400,
            k: 55,
            horizon: 10,
            eps: vec![0.001],
            budgets: (55..=115).step_by(10).collect(),
            gammas: vec![1, 2, 4, 8],
            trials: 100,
            policies: vec![Policy::Greedy, Policy::randomized(0.001), Policy::Random],
            q_var: 0.05,
            r_var: 0.05,
            seed: 7,
            uav: UavConfig::default(),
        };
        match kind {
            ExperimentKind::Tracking => base,
            ExperimentKind::BudgetSweep => Self { trials: 20, ..base },
            ExperimentKind::Histogram => Self {
                k: 60,
                eps: vec![0.1, 0.01, 0.001],
                trials: 100,
                policies: vec![Policy::Greedy],
                ..base
            },
            ExperimentKind::Scaling => Self {
                m: 20,
                n: 200,
                k: 25,
                eps: vec![0.1, 0.01, 0.001],
                trials: 3,
                policies: vec![Policy::Greedy],
                ..base
            },
            ExperimentKind::Uav => Self {
                eps: vec![0.1, 0.01, 0.001],
                trials: 3,
                policies: vec![Policy::Greedy, Policy::AllSensors],
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        if self.gammas.contains(&0) {
            return Err(Error::param("gamma", "scale factors must be at least 1"));
        }
        let needs_policies = matches!(self.kind, ExperimentKind::Tracking | ExperimentKind::BudgetSweep);
        if needs_policies && self.policies.is_empty() {
            return Err(Error::param("policies", "at least one policy is required"));
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::param("epsilon", "values must lie in (0, 1)"));
        }
        Ok(())
    }

    fn instance(&self, k: usize, trial: usize) -> Result<ProblemInstance> {
        generate_instance(
            MeasurementGeneratorSpec::gaussian(self.m),
            self.m,
            self.n,
            k,
            self.horizon,
            self.q_var,
            self.r_var,
            derive_seed(self.seed, &[self.kind.name().into(), "instance".into(), trial.into()]),
        )
    }

    fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, &[self.kind.name().into(), "trial".into(), trial.into()])
    }
}

/// One row of the long-format output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    pub policy: String,
    pub eps: Option<f64>,
    pub gamma: Option<usize>,
    pub trial: usize,
    pub step: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub mse: f64,
    pub f_value: f64,
    pub gain_evals: u64,
    pub select_time_s: f64,
    pub sq_error: f64,
    pub filter_time_s: f64,
}

/// Mean and standard error of one group of records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub policy: String,
    pub eps: Option<f64>,
    pub gamma: Option<usize>,
    #[serde(rename = "K")]
    pub k: usize,
    pub count: usize,
    pub mse_mean: f64,
    pub mse_se: f64,
    pub sq_error_mean: f64,
    pub sq_error_se: f64,
    pub time_mean: f64,
    pub gain_evals_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Timing-based; only enforced with `--assert-perf`.
    pub perf: bool,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
            perf: false,
        }
    }

    fn perf(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            perf: true,
            ..Self::new(name, passed, detail)
        }
    }
}

/// Per-object truth and estimate, UAV experiment only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackRow {
    pub experiment: String,
    pub policy: String,
    pub eps: Option<f64>,
    pub trial: usize,
    pub step: usize,
    pub object_id: usize,
    pub true_x: f64,
    pub true_y: f64,
    pub est_x: f64,
    pub est_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub records: Vec<Record>,
    pub summary: Vec<SummaryRow>,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub track: Vec<TrackRow>,
}

impl ExperimentReport {
    /// True when every check passes, ignoring timing checks unless `perf`.
    pub fn passed(&self, perf: bool) -> bool {
        self.checks.iter().all(|c| c.passed || (c.perf && !perf))
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write_records_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        if self.records.is_empty() {
            w.write_record(RECORD_COLUMNS)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write `<name>_records.csv`, `<name>_summary.json` and, for the UAV
    /// experiment, `<name>_trajectory.csv` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let name = self.kind.name();
        self.write_records_csv(File::create(dir.join(format!("{name}_records.csv")))?)?;
        let json = serde_json::to_string_pretty(self)?;
        fs::write(dir.join(format!("{name}_summary.json")), json)?;
        if !self.track.is_empty() {
            let mut w = csv::Writer::from_path(dir.join(format!("{name}_trajectory.csv")))?;
            for r in &self.track {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

type GroupKey = (String, Option<u64>, Option<usize>, usize);

/// Group records by (policy, eps, gamma, K), keeping only those with
/// `keep(record)`.
fn summarize(records: &[Record], keep: impl Fn(&Record) -> bool) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<GroupKey, Vec<&Record>> = BTreeMap::new();
    for r in records.iter().filter(|r| keep(r)) {
        let key = (r.policy.clone(), r.eps.map(f64::to_bits), r.gamma, r.k);
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((policy, eps, gamma, k), rs)| {
            let mse: Vec<f64> = rs.iter().map(|r| r.mse).collect();
            let sq: Vec<f64> = rs.iter().map(|r| r.sq_error).collect();
            let (mse_mean, mse_se) = mean_se(&mse);
            let (sq_error_mean, sq_error_se) = mean_se(&sq);
            let n = rs.len() as f64;
            SummaryRow {
                policy,
                eps: eps.map(f64::from_bits),
                gamma,
                k,
                count: rs.len(),
                mse_mean,
                mse_se,
                sq_error_mean,
                sq_error_se,
                time_mean: rs.iter().map(|r| r.select_time_s + r.filter_time_s).sum::<f64>() / n,
                gain_evals_mean: rs.iter().map(|r| r.gain_evals as f64).sum::<f64>() / n,
            }
        })
        .collect()
}

fn find<'a>(summary: &'a [SummaryRow], policy: &str, eps: Option<f64>, k: usize) -> Option<&'a SummaryRow> {
    summary
        .iter()
        .find(|s| s.policy == policy && s.eps == eps && s.k == k)
}

/// Run every policy on the trial's instance and world; returns records in
/// (trial, policy, step) order.
fn tracking_records(cfg: &ExperimentConfig, k: usize) -> Result<Vec<Record>> {
    let per_trial: Vec<Result<Vec<Record>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let inst = cfg.instance(k, trial)?;
            let seed = cfg.trial_seed(trial);
            let world = simulate_world(&inst, seed)?;
            let mut out = Vec::new();
            for policy in &cfg.policies {
                for rec in run_filter_on(&inst, policy, seed, &world)? {
                    out.push(Record {
                        experiment: cfg.kind.name().to_string(),
                        policy: policy.name().to_string(),
                        eps: policy.epsilon(),
                        gamma: None,
                        trial,
                        step: rec.step,
                        k,
                        mse: rec.mse,
                        f_value: rec.f_value,
                        gain_evals: rec.gain_evals,
                        select_time_s: rec.select_time_s,
                        sq_error: rec.sq_error,
                        filter_time_s: 0.0,
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_trial {
        records.extend(r?);
    }
    Ok(records)
}

/// Paired-trial standard error of `mean(a) - mean(b)`.
fn paired_diff(records: &[Record], a: (&str, Option<f64>), b: (&str, Option<f64>), k: usize, step: usize) -> (f64, f64) {
    let pick = |(p, e): (&str, Option<f64>)| -> BTreeMap<usize, f64> {
        records
            .iter()
            .filter(|r| r.policy == p && r.eps == e && r.k == k && r.step == step)
            .map(|r| (r.trial, r.mse))
            .collect()
    };
    let (ma, mb) = (pick(a), pick(b));
    let diffs: Vec<f64> = ma
        .iter()
        .filter_map(|(t, x)| mb.get(t).map(|y| x - y))
        .collect();
    mean_se(&diffs)
}

/// Fixed-size tracking study: per-step MSE and selection time of each policy
/// on paired worlds.
pub fn run_tracking(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let records = tracking_records(cfg, cfg.k)?;
    let last = cfg.horizon - 1;
    let summary = summarize(&records, |r| r.step == last);
    let all_steps = summarize(&records, |_| true);
    let mut checks = Vec::new();

    let greedy = find(&summary, "greedy", None, cfg.k);
    let randomized: Vec<&Policy> = cfg
        .policies
        .iter()
        .filter(|p| matches!(p, Policy::Randomized(_)))
        .collect();
    for p in &randomized {
        let eps = p.epsilon();
        let (Some(g), Some(r)) = (greedy, find(&summary, "randomized", eps, cfg.k)) else {
            continue;
        };
        let eps_s = eps.unwrap_or_default();
        checks.push(Check::new(
            format!("final-step MSE greedy <= randomized(eps={eps_s})"),
            g.mse_mean <= r.mse_mean,
            format!("greedy {:.6} vs randomized {:.6}", g.mse_mean, r.mse_mean),
        ));
        checks.push(Check::new(
            format!("final-step MSE randomized(eps={eps_s}) <= 1.10 greedy"),
            r.mse_mean <= 1.10 * g.mse_mean,
            format!("ratio {:.4}", r.mse_mean / g.mse_mean),
        ));
        if let Some(rand) = find(&summary, "random", None, cfg.k) {
            checks.push(Check::new(
                format!("final-step MSE randomized(eps={eps_s}) < random"),
                r.mse_mean < rand.mse_mean,
                format!("randomized {:.6} vs random {:.6}", r.mse_mean, rand.mse_mean),
            ));
        }
        let tg = find(&all_steps, "greedy", None, cfg.k).map(|s| s.time_mean);
        let tr = find(&all_steps, "randomized", eps, cfg.k).map(|s| s.time_mean);
        if let (Some(tg), Some(tr)) = (tg, tr) {
            checks.push(Check::perf(
                format!("selection time greedy/randomized(eps={eps_s}) >= 1.5"),
                tg / tr >= 1.5,
                format!("ratio {:.3} ({:.3e} s vs {:.3e} s per step)", tg / tr, tg, tr),
            ));
        }
    }
    Ok(ExperimentReport {
        kind: cfg.kind,
        config: cfg.clone(),
        records,
        summary,
        checks,
        track: Vec::new(),
    })
}

/// Tracking repeated for every budget in `cfg.budgets`.
pub fn run_budget_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.budgets.is_empty() {
        return Err(Error::param("budgets", "at least one budget is required"));
    }
    let mut records = Vec::new();
    for &k in &cfg.budgets {
        records.extend(tracking_records(cfg, k)?);
    }
    let last = cfg.horizon - 1;
    let summary = summarize(&records, |r| r.step == last);
    let mut checks = Vec::new();
    for p in &cfg.policies {
        let rows: Vec<&SummaryRow> = cfg
            .budgets
            .iter()
            .filter_map(|&k| find(&summary, p.name(), p.epsilon(), k))
            .collect();
        let mut ok = true;
        let mut detail = Vec::new();
        for w in rows.windows(2) {
            let slack = 3.0 * (w[0].mse_se.powi(2) + w[1].mse_se.powi(2)).sqrt();
            if w[1].mse_mean > w[0].mse_mean + slack {
                ok = false;
                detail.push(format!(
                    "K={} {:.6} > K={} {:.6} + {:.2e}",
                    w[1].k, w[1].mse_mean, w[0].k, w[0].mse_mean, slack
                ));
            }
        }
        checks.push(Check::new(
            format!("MSE non-increasing in K for {p}"),
            ok,
            if detail.is_empty() {
                rows.iter()
                    .map(|r| format!("K={}:{:.5}", r.k, r.mse_mean))
                    .collect::<Vec<_>>()
                    .join(" ")
            } else {
                detail.join("; ")
            },
        ));
    }
    let (first, last_k) = (cfg.budgets[0], *cfg.budgets.last().unwrap());
    if cfg.policies.contains(&Policy::Greedy) {
        for p in cfg.policies.iter().filter(|p| **p != Policy::Greedy) {
            let a = (p.name(), p.epsilon());
            let (g0, s0) = paired_diff(&records, a, ("greedy", None), first, last);
            let (g1, s1) = paired_diff(&records, a, ("greedy", None), last_k, last);
            let slack = 3.0 * (s0 * s0 + s1 * s1).sqrt();
            checks.push(Check::new(
                format!("gap {p} - greedy shrinks from K={first} to K={last_k}"),
                g1.abs() <= g0.abs() + slack,
                format!("{g0:.6} -> {g1:.6} (slack {slack:.2e})"),
            ));
        }
    }
    Ok(ExperimentReport {
        kind: cfg.kind,
        config: cfg.clone(),
        records,
        summary,
        checks,
        track: Vec::new(),
    })
}

/// Repeated randomized-greedy runs on one fixed step problem: the first step
/// of a generated instance, `P_pred = Sigma_x + Q`.
pub fn run_histogram(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let inst = cfg.instance(cfg.k, 0)?;
    let p_pred: DMatrix<f64> = &inst.sigma_x + &inst.q;
    let rows = SensorRows::new(&inst.h[0], &inst.r_diag)?;
    let greedy = greedy_select_rows(&p_pred, &rows, cfg.k)?;
    let name = cfg.kind.name().to_string();
    let record = |policy: &str, eps: Option<f64>, trial: usize, sel: &crate::selection::SelectionResult| Record {
        experiment: name.clone(),
        policy: policy.to_string(),
        eps,
        gamma: None,
        trial,
        step: 0,
        k: cfg.k,
        mse: sel.mse,
        f_value: sel.f_final,
        gain_evals: sel.gain_evals,
        select_time_s: sel.wall_time,
        sq_error: f64::NAN,
        filter_time_s: 0.0,
    };
    let mut records = vec![record("greedy", None, 0, &greedy)];
    for &eps in &cfg.eps {
        let sc = SamplingConfig::new(eps);
        let runs: Vec<Result<Record>> = (0..cfg.trials)
            .into_par_iter()
            .map(|run| {
                let mut rng = substream(cfg.seed, &["histogram".into(), eps.to_bits().into(), run.into()]);
                let sel = randomized_greedy_select_rows(&p_pred, &rows, cfg.k, &sc, &mut rng)?;
                Ok(record("randomized", Some(eps), run, &sel))
            })
            .collect();
        for r in runs {
            records.push(r?);
        }
    }
    let summary = summarize(&records, |_| true);
    let mut eps_sorted = cfg.eps.clone();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    let gaps: Vec<(f64, f64, f64)> = eps_sorted
        .iter()
        .filter_map(|&e| find(&summary, "randomized", Some(e), cfg.k))
        .map(|s| (s.eps.unwrap_or_default(), (s.mse_mean - greedy.mse).abs(), s.mse_se))
        .collect();
    let mut ok = true;
    for w in gaps.windows(2) {
        let slack = 3.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt();
        ok &= w[1].1 <= w[0].1 + slack;
    }
    let checks = vec![Check::new(
        "|mean MSE - greedy MSE| non-increasing as eps decreases",
        ok,
        gaps.iter()
            .map(|(e, g, se)| format!("eps={e}: gap {g:.3e} (se {se:.1e})"))
            .collect::<Vec<_>>()
            .join("; "),
    )];
    Ok(ExperimentReport {
        kind: cfg.kind,
        config: cfg.clone(),
        records,
        summary,
        checks,
        track: Vec::new(),
    })
}

/// Tracking at dimensions `(m, n, K) * gamma` for greedy and randomized
/// greedy. Trials run serially so selection timings do not contend.
pub fn run_scaling(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let name = cfg.kind.name().to_string();
    let mut policies = vec![Policy::Greedy];
    policies.extend(cfg.eps.iter().map(|&e| Policy::randomized(e)));
    let mut records = Vec::new();
    for &gamma in &cfg.gammas {
        let (m, n, k) = (cfg.m * gamma, cfg.n * gamma, cfg.k * gamma);
        for trial in 0..cfg.trials {
            let inst = generate_instance(
                MeasurementGeneratorSpec::gaussian(m),
                m,
                n,
                k,
                cfg.horizon,
                cfg.q_var,
                cfg.r_var,
                derive_seed(cfg.seed, &["scaling".into(), gamma.into(), trial.into()]),
            )?;
            let seed = derive_seed(cfg.seed, &["scaling-trial".into(), gamma.into(), trial.into()]);
            let world = simulate_world(&inst, seed)?;
            for policy in &policies {
                for rec in run_filter_on(&inst, policy, seed, &world)? {
                    records.push(Record {
                        experiment: name.clone(),
                        policy: policy.name().to_string(),
                        eps: policy.epsilon(),
                        gamma: Some(gamma),
                        trial,
                        step: rec.step,
                        k,
                        mse: rec.mse,
                        f_value: rec.f_value,
                        gain_evals: rec.gain_evals,
                        select_time_s: rec.select_time_s,
                        sq_error: rec.sq_error,
                        filter_time_s: 0.0,
                    });
                }
            }
        }
    }
    let last = cfg.horizon - 1;
    let summary = summarize(&records, |r| r.step == last);
    let timing = summarize(&records, |_| true);
    let mut checks = Vec::new();
    for &eps in &cfg.eps {
        let ratios: Vec<(usize, f64, f64)> = cfg
            .gammas
            .iter()
            .filter_map(|&g| {
                let pick = |t: &'_ [SummaryRow], e: Option<f64>| {
                    t.iter().find(|s| s.gamma == Some(g) && s.eps == e).map(|s| (s.time_mean, s.mse_mean))
                };
                let (tg, mg) = (pick(&timing, None)?.0, pick(&summary, None)?.1);
                let (tr, mr) = (pick(&timing, Some(eps))?.0, pick(&summary, Some(eps))?.1);
                Some((g, tg / tr, (mr - mg).abs() / mg))
            })
            .collect();
        let increasing = ratios.windows(2).all(|w| w[1].1 > w[0].1);
        checks.push(Check::perf(
            format!("time ratio greedy/randomized(eps={eps}) increasing in gamma"),
            increasing,
            ratios
                .iter()
                .map(|(g, r, _)| format!("gamma={g}: {r:.2}"))
                .collect::<Vec<_>>()
                .join(", "),
        ));
        if eps <= 0.001 {
            let worst = ratios.iter().map(|r| r.2).fold(0.0, f64::max);
            checks.push(Check::new(
                format!("MSE gap <= 5% at eps={eps}"),
                worst <= 0.05,
                format!("largest relative gap {worst:.4}"),
            ));
            if let Some(&(g, r, _)) = ratios.iter().find(|r| r.0 == 8) {
                checks.push(Check::perf(
                    format!("speedup >= 3 at gamma={g}, eps={eps}"),
                    r >= 3.0,
                    format!("{r:.2}"),
                ));
            }
        }
    }
    Ok(ExperimentReport {
        kind: cfg.kind,
        config: cfg.clone(),
        records,
        summary,
        checks,
        track: Vec::new(),
    })
}

/// UAV tracking: greedy, randomized greedy for each `eps` and all
/// measurements, on identical worlds per trial.
pub fn run_uav_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut policies: Vec<Policy> = cfg
        .policies
        .iter()
        .copied()
        .filter(|p| !matches!(p, Policy::Randomized(_)))
        .collect();
    policies.extend(cfg.eps.iter().map(|&e| Policy::randomized(e)));
    let name = cfg.kind.name().to_string();
    let mut records = Vec::new();
    let mut track = Vec::new();
    for trial in 0..cfg.trials {
        let seed = cfg.trial_seed(trial);
        for policy in &policies {
            let run = run_scenario(&cfg.uav, *policy, seed)?;
            for r in &run.records {
                records.push(Record {
                    experiment: name.clone(),
                    policy: policy.name().to_string(),
                    eps: policy.epsilon(),
                    gamma: None,
                    trial,
                    step: r.step,
                    k: cfg.uav.budget,
                    mse: r.mean_trace,
                    f_value: r.f_value,
                    gain_evals: r.gain_evals,
                    select_time_s: r.select_time_s,
                    sq_error: r.mse,
                    filter_time_s: r.filter_time_s,
                });
            }
            track.extend(run.track.iter().map(|p| TrackRow {
                experiment: name.clone(),
                policy: policy.name().to_string(),
                eps: policy.epsilon(),
                trial,
                step: p.step,
                object_id: p.object,
                true_x: p.true_pos[0],
                true_y: p.true_pos[1],
                est_x: p.est_pos[0],
                est_y: p.est_pos[1],
            }));
        }
    }
    let summary = summarize(&records, |_| true);
    let mut checks = Vec::new();
    let k = cfg.uav.budget;
    let all = find(&summary, "all", None, k);
    let greedy = find(&summary, "greedy", None, k);
    for &eps in &cfg.eps {
        let Some(r) = find(&summary, "randomized", Some(eps), k) else {
            continue;
        };
        if let Some(a) = all {
            checks.push(Check::new(
                format!("tracking MSE randomized(eps={eps}) within 15% of all"),
                r.sq_error_mean <= 1.15 * a.sq_error_mean,
                format!(
                    "randomized {:.5} vs all {:.5} (ratio {:.3})",
                    r.sq_error_mean,
                    a.sq_error_mean,
                    r.sq_error_mean / a.sq_error_mean
                ),
            ));
            checks.push(Check::perf(
                format!("combined time randomized(eps={eps}) < all"),
                r.time_mean < a.time_mean,
                format!("{:.3e} s vs {:.3e} s per step", r.time_mean, a.time_mean),
            ));
        }
    }
    if let (Some(a), Some(g)) = (all, greedy) {
        checks.push(Check::perf(
            "combined time all < greedy",
            a.time_mean < g.time_mean,
            format!("{:.3e} s vs {:.3e} s per step", a.time_mean, g.time_mean),
        ));
    }
    Ok(ExperimentReport {
        kind: cfg.kind,
        config: cfg.clone(),
        records,
        summary,
        checks,
        track,
    })
}

/// Dispatch on `cfg.kind`.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.kind {
        ExperimentKind::Tracking => run_tracking(cfg),
        ExperimentKind::BudgetSweep => run_budget_sweep(cfg),
        ExperimentKind::Histogram => run_histogram(cfg),
        ExperimentKind::Scaling => run_scaling(cfg),
        ExperimentKind::Uav => run_uav_experiment(cfg),
    }
}
