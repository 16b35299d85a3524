use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ringsched::harness::experiment::{run_experiment, write_outputs, ExperimentConfig, PolicyChoice, Scenario};
use ringsched::harness::metrics::{mean, spearman};
use ringsched::harness::runlog::{audit, RunLog};

/// Log verbosity, in `env_logger` filter syntax.
const LOG_ENV: &str = "RINGSCHED_LOG";

#[derive(Parser)]
#[command(name = "ringsched", version, about = "Online ring-all-reduce job scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV results and run logs.
    Run(RunArgs),
    /// Replay and audit a run log.
    Validate {
        #[arg(long)]
        schedule: PathBuf,
        /// Only check constraints, do not recompute slots.
        #[arg(long)]
        no_replay: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = ["utility", "node-ratio", "edge-ratio", "approx"])]
    scenario: String,
    /// One policy or a comma-separated list.
    #[arg(long, default_value = "gadget", value_delimiter = ',')]
    policy: Vec<String>,
    /// Cluster JSON file or `gen:key=value,...`.
    #[arg(long)]
    cluster: Option<String>,
    /// Trace CSV file or `gen:key=value,...`.
    #[arg(long)]
    trace: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Consecutive seeds to run, starting at `--seed`.
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    slots: Option<u32>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    gpu_only: bool,
    /// Sweep points, comma-separated.
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
    /// Skip writing per-run JSON logs.
    #[arg(long)]
    no_logs: bool,
}

enum Failure {
    Config(anyhow::Error),
    Audit(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { schedule, no_replay } => validate(&schedule, !no_replay),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Audit(msg)) => {
            eprintln!("audit failed: {msg}");
            ExitCode::from(2)
        }
    }
}

fn config(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let scenario = Scenario::parse(&args.scenario)?;
    let mut cfg = ExperimentConfig::new(scenario);
    cfg.policies = args.policy.iter().map(|p| PolicyChoice::parse(p.trim())).collect::<Result<_, _>>()?;
    if let Some(c) = &args.cluster {
        cfg.cluster = c.clone();
    }
    if let Some(t) = &args.trace {
        cfg.trace = t.clone();
    }
    cfg.seed = args.seed;
    cfg.trials = args.trials.unwrap_or(cfg.trials);
    cfg.slots = args.slots.unwrap_or(cfg.slots);
    cfg.gvne.epsilon = args.epsilon.unwrap_or(cfg.gvne.epsilon);
    cfg.gvne.rounds = args.rounds.unwrap_or(cfg.gvne.rounds);
    cfg.gpu_only = args.gpu_only;
    if let Some(p) = &args.points {
        cfg.points = p.clone();
    }
    cfg.keep_logs = !args.no_logs;
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let cfg = config(&args)?;
    let out = run_experiment(&cfg).context("experiment failed")?;
    for w in &out.warnings {
        log::warn!("{w}");
    }
    write_outputs(&cfg, &out, &args.out).context("writing outputs")?;

    match cfg.scenario {
        Scenario::Approx => {
            let ratios: Vec<f64> = out.approx.iter().map(|r| r.ratio).collect();
            println!(
                "approx: {} slots compared, {} skipped, mean ratio {:.4}, min ratio {:.4}",
                ratios.len(),
                out.skipped.len(),
                mean(ratios.iter().copied()).unwrap_or(f64::NAN),
                ratios.iter().copied().fold(f64::NAN, f64::min),
            );
        }
        Scenario::Utility => {
            for policy in &cfg.policies {
                for r in out.rows.iter().filter(|r| r.policy == policy.name()) {
                    println!("{} seed {} jobs {}: utility {:.4}", r.policy, r.seed, r.jobs, r.total_utility);
                }
            }
        }
        Scenario::NodeRatio | Scenario::EdgeRatio => {
            for policy in &cfg.policies {
                let by_point = out.mean_ratio_by_point(policy.name());
                let (xs, ys): (Vec<f64>, Vec<f64>) = by_point.iter().copied().unzip();
                let cells: Vec<String> = by_point.iter().map(|(p, r)| format!("{p}:{r:.4}")).collect();
                let rho = spearman(&xs, &ys).map_or("undefined".to_string(), |r| format!("{r:.3}"));
                println!("{} embedded ratio {} spearman {rho}", policy.name(), cells.join(" "));
            }
        }
    }

    let mut failed = Vec::new();
    for (stem, log) in &out.logs {
        let report = audit(log, false).with_context(|| format!("auditing {stem}"))?;
        if !report.passed() {
            failed.push(stem.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Audit(format!("runs {} broke their constraints", failed.join(", "))))
    }
}

fn validate(path: &Path, replay: bool) -> Result<(), Failure> {
    let log = RunLog::read(path).context("reading run log")?;
    let report = audit(&log, replay).context("audit could not run")?;
    println!("{}", serde_json::to_string_pretty(&report).context("serializing report")?);
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Audit(format!("{} violations, {} budget breaches, replay mismatches at {:?}, objective matches: {}",
            report.violations.len(), report.budget_breaches.len(), report.replay_mismatches, report.objective_matches)))
    }
}
