//! Experiment harness: seeded instance suites, paired solver runs, CSV
//! records and per-configuration summaries.

mod svg;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::global::{perts_solve, ConcatPolicy, PertsConfig};
use crate::manipulation::{MotionPlanner, PlannerConfig};
use crate::monotone::{solve, SolverConfig, SolverKind};
use crate::plan::Plan;
use crate::world::{sample_instance, Instance, WorldSpec};

pub use svg::{render_svg, write_svg};

/// Seeds for classification runs are offset so they never coincide with the
/// seeds of the measured runs.
const CLASSIFY_SEED_SALT: u64 = 0x5eed_c1a5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Monotone,
    NonMonotone,
    Unsolved,
}

/// Monotone if the lazy solver succeeds outright, non-monotone if only the
/// hybrid perturbation search does, unsolved otherwise.
pub fn classify_instance(
    instance: &Instance,
    planner: &PlannerConfig,
    budget: Duration,
    seed: u64,
    max_perturbations: Option<u64>,
) -> Classification {
    let oracle = MotionPlanner::new(instance, planner);
    if solve(
        instance,
        &oracle,
        &SolverConfig::new(SolverKind::Lrs).with_budget(budget),
    )
    .solved
    {
        return Classification::Monotone;
    }
    let mut config = PertsConfig::new(ConcatPolicy::Hybrid)
        .with_budget(budget)
        .with_seed(seed ^ CLASSIFY_SEED_SALT);
    config.max_perturbations = max_perturbations;
    if perts_solve(instance, &oracle, config).solved() {
        Classification::NonMonotone
    } else {
        Classification::Unsolved
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceFilter {
    #[default]
    Any,
    MonotoneOnly,
    NonmonotoneOnly,
}

fn default_budget() -> f64 {
    10.0
}

fn default_attempts() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default)]
    pub world: WorldSpec,
    pub object_counts: Vec<usize>,
    pub instances_per_count: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Per-run wall-clock budget in seconds.
    #[serde(default = "default_budget")]
    pub budget_secs: f64,
    /// Budget for classification when filtering; defaults to `budget_secs`.
    #[serde(default)]
    pub classify_budget_secs: Option<f64>,
    pub solvers: Vec<SolverKind>,
    /// Empty: monotone runs only. Otherwise every solver is used as the
    /// local solver of the perturbation search under each policy.
    #[serde(default)]
    pub policies: Vec<ConcatPolicy>,
    #[serde(default)]
    pub filter: InstanceFilter,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default)]
    pub max_perturbations: Option<u64>,
    /// Candidate seeds tried per requested instance before giving up.
    #[serde(default = "default_attempts")]
    pub max_sampling_attempts: usize,
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("invalid suite: {0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<(), SuiteError> {
        let bad = |m: &str| Err(SuiteError::Invalid(m.to_string()));
        if self.instances_per_count == 0 {
            return bad("instances_per_count must be at least 1");
        }
        if self.object_counts.is_empty() || self.object_counts.contains(&0) {
            return bad("object_counts must be a non-empty list of positive counts");
        }
        if self.solvers.is_empty() {
            return bad("solvers must not be empty");
        }
        if !(self.budget_secs.is_finite() && self.budget_secs > 0.0) {
            return bad("budget_secs must be positive");
        }
        self.world
            .validate()
            .map_err(|e| SuiteError::Invalid(e.to_string()))
    }

    pub fn budget(&self) -> Duration {
        Duration::from_secs_f64(self.budget_secs)
    }

    fn classify_budget(&self) -> Duration {
        Duration::from_secs_f64(self.classify_budget_secs.unwrap_or(self.budget_secs))
    }
}

#[derive(Debug, Clone)]
pub struct SuiteInstance {
    pub id: String,
    pub n: usize,
    pub seed: u64,
    pub instance: Instance,
    pub class: Option<Classification>,
}

fn accepts(filter: InstanceFilter, class: Classification) -> bool {
    match filter {
        InstanceFilter::Any => true,
        InstanceFilter::MonotoneOnly => class == Classification::Monotone,
        InstanceFilter::NonmonotoneOnly => class == Classification::NonMonotone,
    }
}

/// Samples (and, when filtering, classifies) the suite's instances. The
/// accepted set depends only on the spec.
pub fn generate_instances(spec: &SuiteSpec) -> Vec<SuiteInstance> {
    let mut out = Vec::new();
    for &n in &spec.object_counts {
        let first = spec.seed_base + 1_000_000 * n as u64;
        let limit = (spec.instances_per_count * spec.max_sampling_attempts.max(1)) as u64;
        let mut accepted = Vec::new();
        let mut next = 0u64;
        let chunk = (spec.instances_per_count as u64).max(8);
        while accepted.len() < spec.instances_per_count && next < limit {
            let seeds: Vec<u64> = (next..(next + chunk).min(limit))
                .map(|k| first + k)
                .collect();
            next += seeds.len() as u64;
            let classify = |seed: u64| -> Option<SuiteInstance> {
                let instance = sample_instance(&spec.world, n, seed).ok()?;
                let class = (spec.filter != InstanceFilter::Any).then(|| {
                    classify_instance(
                        &instance,
                        &spec.planner,
                        spec.classify_budget(),
                        seed,
                        spec.max_perturbations,
                    )
                });
                if class.is_some_and(|c| !accepts(spec.filter, c)) {
                    return None;
                }
                Some(SuiteInstance {
                    id: format!("n{n}-s{seed}"),
                    n,
                    seed,
                    instance,
                    class,
                })
            };
            let batch: Vec<Option<SuiteInstance>> = if spec.parallel {
                seeds.par_iter().map(|&s| classify(s)).collect()
            } else {
                seeds.iter().map(|&s| classify(s)).collect()
            };
            accepted.extend(batch.into_iter().flatten());
        }
        accepted.truncate(spec.instances_per_count);
        out.extend(accepted);
    }
    out
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_id: String,
    pub solver: String,
    pub policy: String,
    pub n: usize,
    pub solved: bool,
    pub total_ms: f64,
    pub verify_ms: f64,
    pub other_ms: f64,
    pub planner_calls: u64,
    pub buffers: usize,
    pub seed: u64,
}

impl RunRecord {
    fn sort_key(&self) -> (usize, u64, &str, &str) {
        (self.n, self.seed, &self.solver, &self.policy)
    }
}

pub const NO_POLICY: &str = "none";

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Runs one solver (and policy, for non-monotone runs) on one instance.
pub fn run_job(
    spec: &SuiteSpec,
    item: &SuiteInstance,
    solver: SolverKind,
    policy: Option<ConcatPolicy>,
) -> (RunRecord, Option<Plan>) {
    let oracle = MotionPlanner::new(&item.instance, &spec.planner);
    let (solved, total, verify, calls, plan) = match policy {
        None => {
            let out = solve(
                &item.instance,
                &oracle,
                &SolverConfig::new(solver).with_budget(spec.budget()),
            );
            let plan = out
                .goal_node
                .map(|g| Plan::from_tree(&out.tree, g).expect("verified goal branch"));
            (
                out.solved,
                out.stats.total_time,
                out.stats.motion.verify_time,
                out.stats.motion.planner_calls,
                plan,
            )
        }
        Some(p) => {
            let mut config = PertsConfig::new(p)
                .with_budget(spec.budget())
                .with_seed(item.seed);
            config.local = solver;
            config.max_perturbations = spec.max_perturbations;
            let out = perts_solve(&item.instance, &oracle, config);
            (
                out.solved(),
                out.stats.total_time,
                out.stats.motion.verify_time,
                out.stats.motion.planner_calls,
                out.plan,
            )
        }
    };
    let verify = verify.min(total);
    let record = RunRecord {
        instance_id: item.id.clone(),
        solver: solver.to_string(),
        policy: policy.map_or(NO_POLICY.to_string(), |p| p.to_string()),
        n: item.n,
        solved,
        total_ms: ms(total),
        verify_ms: ms(verify),
        other_ms: ms(total - verify),
        planner_calls: calls,
        buffers: plan.as_ref().map_or(0, Plan::buffers_used),
        seed: item.seed,
    };
    (record, plan)
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub instances: Vec<SuiteInstance>,
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

pub fn run_suite(spec: &SuiteSpec) -> Result<SuiteResult, SuiteError> {
    run_suite_with(spec, |_, _| {})
}

/// Like [`run_suite`], calling `on_run` as each run finishes (in completion
/// order, possibly from several threads).
pub fn run_suite_with<F>(spec: &SuiteSpec, on_run: F) -> Result<SuiteResult, SuiteError>
where
    F: Fn(&RunRecord, Option<&Plan>) + Sync,
{
    spec.validate()?;
    let instances = generate_instances(spec);
    let policies: Vec<Option<ConcatPolicy>> = if spec.policies.is_empty() {
        vec![None]
    } else {
        spec.policies.iter().copied().map(Some).collect()
    };
    let mut jobs: Vec<(usize, SolverKind, Option<ConcatPolicy>)> = Vec::new();
    for i in 0..instances.len() {
        for &s in &spec.solvers {
            jobs.extend(policies.iter().map(|&p| (i, s, p)));
        }
    }
    let run = |&(i, s, p): &(usize, SolverKind, Option<ConcatPolicy>)| {
        let (record, plan) = run_job(spec, &instances[i], s, p);
        on_run(&record, plan.as_ref());
        record
    };
    let mut records: Vec<RunRecord> = if spec.parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let summary = summarize(&records);
    Ok(SuiteResult {
        instances,
        records,
        summary,
    })
}

pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<(), SuiteError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRecord>, SuiteError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<RunRecord>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub solver: String,
    pub policy: String,
    pub n: usize,
    pub runs: usize,
    pub solved: usize,
    pub success_rate: f64,
    pub mean_total_ms: f64,
    pub mean_verify_ms: f64,
    pub mean_other_ms: f64,
    pub mean_planner_calls: f64,
    /// Over solved runs only.
    pub mean_buffers: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Aggregates per (solver, policy, n); times and calls are averaged over all
/// runs, buffers over solved runs.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.solver.clone(), r.policy.clone(), r.n))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((solver, policy, n), rs)| {
            let solved = rs.iter().filter(|r| r.solved).count();
            SummaryRow {
                solver,
                policy,
                n,
                runs: rs.len(),
                solved,
                success_rate: solved as f64 / rs.len() as f64,
                mean_total_ms: mean(rs.iter().map(|r| r.total_ms)),
                mean_verify_ms: mean(rs.iter().map(|r| r.verify_ms)),
                mean_other_ms: mean(rs.iter().map(|r| r.other_ms)),
                mean_planner_calls: mean(rs.iter().map(|r| r.planner_calls as f64)),
                mean_buffers: mean(rs.iter().filter(|r| r.solved).map(|r| r.buffers as f64)),
            }
        })
        .collect()
}

/// Fixed-width text table of a summary.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<7} {:<13} {:>3} {:>5} {:>8} {:>11} {:>11} {:>11} {:>9} {:>8}\n",
        "solver",
        "policy",
        "n",
        "runs",
        "success",
        "total_ms",
        "verify_ms",
        "other_ms",
        "calls",
        "buffers"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<7} {:<13} {:>3} {:>5} {:>7.1}% {:>11.2} {:>11.2} {:>11.2} {:>9.1} {:>8.2}\n",
            r.solver,
            r.policy,
            r.n,
            r.runs,
            100.0 * r.success_rate,
            r.mean_total_ms,
            r.mean_verify_ms,
            r.mean_other_ms,
            r.mean_planner_calls,
            r.mean_buffers
        ));
    }
    s
}
