use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use rearrange_core::harness::{
    format_summary, read_csv, run_suite_with, summarize, write_csv, write_svg,
};
use rearrange_core::io::load_world;
use rearrange_core::manipulation::PlannerKind;
use rearrange_core::{
    classify_instance, load_instance, load_solution, obtain_constraints, perts_solve,
    sample_instance, save_instance, solve, validate_plan, Classification, ConcatPolicy,
    InstanceFilter, MotionPlanner, PertsConfig, Plan, PlannerConfig, SolutionFile, SolverConfig,
    SolverKind, SuiteSpec, WorldSpec,
};

/// Task planning for object rearrangement in a shelf-like workspace.
#[derive(Parser)]
#[command(name = "rearrange", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Planner {
    Grid,
    Roadmap,
}

#[derive(Clone, Copy, ValueEnum)]
enum Filter {
    Any,
    MonotoneOnly,
    NonmonotoneOnly,
}

#[derive(Subcommand)]
enum Command {
    /// Sample random instances into a directory.
    Generate {
        /// World description; the default shelf when omitted.
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Keep only instances of this class (classification runs the planners).
        #[arg(long, value_enum, default_value_t = Filter::Any)]
        filter: Filter,
        /// Classification budget in seconds.
        #[arg(long, default_value_t = 10.0)]
        budget: f64,
    },
    /// Solve one instance. Exits with status 2 when no plan is found.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "lrs")]
        solver: SolverKind,
        /// Use the perturbation planner with this concatenation policy;
        /// without it the monotone solver runs alone.
        #[arg(long)]
        policy: Option<ConcatPolicy>,
        /// Wall-clock budget in seconds.
        #[arg(long, default_value_t = 30.0)]
        budget: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_perturbations: Option<u64>,
        #[arg(long, value_enum, default_value_t = Planner::Grid)]
        planner: Planner,
        /// Write the solution here.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Run a benchmark suite and write per-run records as CSV.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        /// Also write the summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Print the summary of an existing CSV.
    Summarize {
        #[arg(long)]
        csv: PathBuf,
    },
    /// Draw an instance, and optionally a plan, as SVG.
    Render {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a solution against its instance.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Require every object to move at most once, straight to its goal.
        #[arg(long)]
        monotone: bool,
    },
    /// Print the reachability constraints of an instance as JSON.
    Constraints {
        #[arg(long)]
        instance: PathBuf,
    },
}

fn budget(secs: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(secs).with_context(|| format!("invalid budget {secs}"))
}

fn generate(
    world: Option<&Path>,
    n: usize,
    count: usize,
    seed: u64,
    out: &Path,
    filter: Filter,
    secs: f64,
) -> Result<()> {
    let world = match world {
        Some(p) => load_world(p)?,
        None => WorldSpec::default(),
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let filter = match filter {
        Filter::Any => InstanceFilter::Any,
        Filter::MonotoneOnly => InstanceFilter::MonotoneOnly,
        Filter::NonmonotoneOnly => InstanceFilter::NonmonotoneOnly,
    };
    let limit = budget(secs)?;
    let mut written = 0;
    let mut s = seed;
    let max_seed = seed + 50 * count as u64;
    while written < count && s < max_seed {
        let inst = sample_instance(&world, n, s)?;
        let keep = match filter {
            InstanceFilter::Any => true,
            f => {
                let class = classify_instance(&inst, &PlannerConfig::default(), limit, s, None);
                matches!(
                    (f, class),
                    (InstanceFilter::MonotoneOnly, Classification::Monotone)
                        | (InstanceFilter::NonmonotoneOnly, Classification::NonMonotone)
                )
            }
        };
        if keep {
            let path = out.join(format!("n{n}-s{s}.json"));
            save_instance(&inst, &path).with_context(|| format!("writing {}", path.display()))?;
            println!("{}", path.display());
            written += 1;
        }
        s += 1;
    }
    if written < count {
        bail!("only {written} of {count} instances passed the filter");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve_cmd(
    instance: &Path,
    solver: SolverKind,
    policy: Option<ConcatPolicy>,
    secs: f64,
    seed: u64,
    max_perturbations: Option<u64>,
    planner: Planner,
    plan_out: Option<&Path>,
) -> Result<bool> {
    let inst = load_instance(instance)?;
    let config = PlannerConfig {
        planner: match planner {
            Planner::Grid => PlannerKind::Grid,
            Planner::Roadmap => PlannerKind::Roadmap,
        },
        ..PlannerConfig::default()
    };
    let oracle = MotionPlanner::new(&inst, &config);
    let (plan, stats) = match policy {
        None => {
            let out = solve(
                &inst,
                &oracle,
                &SolverConfig::new(solver).with_budget(budget(secs)?),
            );
            let plan = out
                .goal_node
                .map(|g| Plan::from_tree(&out.tree, g).expect("goal branch is verified"));
            (plan, serde_json::to_value(out.stats)?)
        }
        Some(p) => {
            let mut cfg = PertsConfig::new(p)
                .with_budget(budget(secs)?)
                .with_seed(seed);
            cfg.local = solver;
            cfg.max_perturbations = max_perturbations;
            let out = perts_solve(&inst, &oracle, cfg);
            (out.plan, serde_json::to_value(out.stats)?)
        }
    };
    let label = policy.map_or(solver.to_string(), |p| format!("{solver}+{p}"));
    match &plan {
        Some(plan) => {
            println!(
                "{label}: solved with {} actions, {} buffers",
                plan.len(),
                plan.buffers_used()
            );
            if let Some(path) = plan_out {
                let file = SolutionFile::new(&inst, plan, stats.clone());
                fs::write(path, serde_json::to_string_pretty(&file)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        None => println!("{label}: no plan found"),
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({ "stats": stats }))?
    );
    Ok(plan.is_some())
}

fn bench(suite: &Path, csv_path: &Path, summary_path: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(suite).with_context(|| format!("reading {}", suite.display()))?;
    let spec: SuiteSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", suite.display()))?;
    // rows are appended as runs finish so an interrupted suite keeps its results
    let file =
        File::create(csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    let sink = Mutex::new(csv::Writer::from_writer(file));
    let result = run_suite_with(&spec, |record, _| {
        let mut w = sink.lock().unwrap();
        if w.serialize(record)
            .and_then(|_| w.flush().map_err(csv::Error::from))
            .is_err()
        {
            eprintln!(
                "warning: could not append {} to {}",
                record.instance_id,
                csv_path.display()
            );
        }
    })?;
    drop(sink);
    // rewrite in canonical order
    write_csv(&result.records, File::create(csv_path)?)?;
    print!("{}", format_summary(&result.summary));
    if let Some(path) = summary_path {
        fs::write(path, serde_json::to_string_pretty(&result.summary)?)?;
    }
    Ok(())
}

fn render(instance: &Path, plan: Option<&Path>, out: &Path) -> Result<()> {
    let inst = load_instance(instance)?;
    let plan = plan
        .map(|p| load_solution(p).and_then(|s| s.to_plan(&inst)))
        .transpose()?;
    write_svg(&inst, plan.as_ref(), out).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate {
            world,
            n,
            count,
            seed,
            out,
            filter,
            budget,
        } => generate(world.as_deref(), n, count, seed, &out, filter, budget)?,
        Command::Solve {
            instance,
            solver,
            policy,
            budget,
            seed,
            max_perturbations,
            planner,
            plan,
        } => {
            if !solve_cmd(
                &instance,
                solver,
                policy,
                budget,
                seed,
                max_perturbations,
                planner,
                plan.as_deref(),
            )? {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Bench {
            suite,
            csv,
            summary,
        } => bench(&suite, &csv, summary.as_deref())?,
        Command::Summarize { csv } => {
            let records =
                read_csv(File::open(&csv).with_context(|| format!("opening {}", csv.display()))?)?;
            print!("{}", format_summary(&summarize(&records)));
        }
        Command::Render {
            instance,
            plan,
            out,
        } => render(&instance, plan.as_deref(), &out)?,
        Command::Validate {
            instance,
            plan,
            monotone,
        } => {
            let inst = load_instance(&instance)?;
            let plan = load_solution(&plan)?.to_plan(&inst)?;
            match validate_plan(&inst, &plan, monotone) {
                Ok(_) => println!(
                    "valid: {} actions, {} buffers",
                    plan.len(),
                    plan.buffers_used()
                ),
                Err(e) => {
                    println!("invalid: {e}");
                    return Ok(ExitCode::from(2));
                }
            }
        }
        Command::Constraints { instance } => {
            let inst = load_instance(&instance)?;
            let store = obtain_constraints(&inst)?;
            println!("{}", serde_json::to_string_pretty(&store.to_json(&inst))?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
