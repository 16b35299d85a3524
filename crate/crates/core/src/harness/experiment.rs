use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{Baseline, BaselinePolicy};
use crate::gvne::{exact_oracle, incremental_utility, GvneConfig, GvneInstance, OracleLimits};
use crate::model::{Job, SubstrateNetwork};
use crate::scheduler::{active_set, run_online, Gadget, SlotPolicy};

use super::cluster::{gpu_only, load_cluster};
use super::metrics::{grouped_means, RunMetrics};
use super::runlog::RunLog;
use super::trace::load_trace_arg;
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    Gadget,
    Baseline(BaselinePolicy),
}

impl PolicyChoice {
    pub const ALL: [&'static str; 4] = ["gadget", "fifo", "drf", "las"];

    pub fn parse(name: &str) -> Result<Self, HarnessError> {
        match name {
            "gadget" => Ok(PolicyChoice::Gadget),
            "fifo" => Ok(PolicyChoice::Baseline(BaselinePolicy::fifo())),
            "drf" => Ok(PolicyChoice::Baseline(BaselinePolicy::Drf)),
            "las" => Ok(PolicyChoice::Baseline(BaselinePolicy::las())),
            _ => Err(HarnessError::Config(format!("unknown policy '{name}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyChoice::Gadget => "gadget",
            PolicyChoice::Baseline(BaselinePolicy::Fifo { .. }) => "fifo",
            PolicyChoice::Baseline(BaselinePolicy::Drf) => "drf",
            PolicyChoice::Baseline(BaselinePolicy::Las { .. }) => "las",
        }
    }

    pub fn build(&self, gvne: &GvneConfig, seed: u64) -> Box<dyn SlotPolicy> {
        match *self {
            PolicyChoice::Gadget => Box::new(Gadget::new(gvne.clone(), seed)),
            PolicyChoice::Baseline(policy) => Box::new(Baseline { policy }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Total utility as the job count grows.
    Utility,
    /// Embedded ratio as node capacities are multiplied.
    NodeRatio,
    /// Embedded ratio as link bandwidths are multiplied.
    EdgeRatio,
    /// Per-slot GADGET utility against the exact oracle on small instances.
    Approx,
}

/// Edge-sweep multipliers are applied on top of this factor, so that at
/// multiplier 1 server links carry 0.5 to 5 Gbps and bandwidth binds.
pub const EDGE_SWEEP_BASE: f64 = 0.05;

impl Scenario {
    pub fn parse(name: &str) -> Result<Self, HarnessError> {
        match name {
            "utility" => Ok(Scenario::Utility),
            "node-ratio" => Ok(Scenario::NodeRatio),
            "edge-ratio" => Ok(Scenario::EdgeRatio),
            "approx" => Ok(Scenario::Approx),
            _ => Err(HarnessError::Config(format!("unknown scenario '{name}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Utility => "utility",
            Scenario::NodeRatio => "node-ratio",
            Scenario::EdgeRatio => "edge-ratio",
            Scenario::Approx => "approx",
        }
    }

    /// Column name of the swept quantity.
    fn point_column(&self) -> &'static str {
        match self {
            Scenario::Utility => "jobs",
            Scenario::NodeRatio => "node_multiplier",
            Scenario::EdgeRatio => "edge_multiplier",
            Scenario::Approx => "slot",
        }
    }

    fn default_points(&self) -> Vec<f64> {
        match self {
            Scenario::Utility => vec![0.25, 0.5, 0.75, 1.0],
            Scenario::NodeRatio | Scenario::EdgeRatio => vec![1.0, 2.0, 3.0, 4.0],
            Scenario::Approx => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub policies: Vec<PolicyChoice>,
    /// Cluster JSON path or `gen:` spec.
    pub cluster: String,
    /// Trace CSV path or `gen:` spec.
    pub trace: String,
    pub seed: u64,
    /// Seeds `seed..seed + trials`.
    pub trials: u32,
    pub slots: u32,
    pub gvne: GvneConfig,
    pub gpu_only: bool,
    /// Sweep points: job-count fractions for `utility`, multipliers for the
    /// ratio sweeps.
    pub points: Vec<f64>,
    pub keep_logs: bool,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        let (cluster, trace, trials, slots) = match scenario {
            Scenario::Approx => ("gen:servers=4,racks=1-2,gpus=1/2", "gen:jobs=3,workers=1-4,utility=sqrt", 20, 4),
            Scenario::Utility => ("gen:", "gen:", 1, 50),
            Scenario::NodeRatio | Scenario::EdgeRatio => ("gen:", "gen:", 3, 50),
        };
        ExperimentConfig {
            scenario,
            policies: vec![PolicyChoice::Gadget],
            cluster: cluster.into(),
            trace: trace.into(),
            seed: 1,
            trials,
            slots,
            gvne: GvneConfig::default(),
            gpu_only: false,
            points: scenario.default_points(),
            keep_logs: false,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.gvne.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.slots < 1 {
            return Err(HarnessError::Config("slots must be >= 1".into()));
        }
        if self.trials < 1 {
            return Err(HarnessError::Config("trials must be >= 1".into()));
        }
        if self.policies.is_empty() {
            return Err(HarnessError::Config("no policy given".into()));
        }
        if self.scenario == Scenario::Approx && !self.policies.contains(&PolicyChoice::Gadget) {
            return Err(HarnessError::Config("the approx scenario evaluates the gadget policy only".into()));
        }
        if self.points.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(HarnessError::Config("sweep points must be finite and nonnegative".into()));
        }
        for policy in &self.policies {
            if let PolicyChoice::Baseline(b) = policy {
                b.validate().map_err(HarnessError::Config)?;
            }
        }
        Ok(())
    }

    pub fn trial_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.trials as u64).map(|k| self.seed.wrapping_add(k))
    }
}

/// A cluster and a job list for one trial.
#[derive(Debug, Clone)]
pub struct Environment {
    pub network: SubstrateNetwork,
    pub jobs: Vec<Job>,
    pub warnings: Vec<String>,
}

/// Loads or generates the trial's cluster and trace. Generated ones take
/// `seed` (and the trace takes the slot count as its horizon) unless the
/// spec sets them.
pub fn environment(cluster: &str, trace: &str, seed: u64, slots: u32, gpu_only_flag: bool) -> Result<Environment, HarnessError> {
    let cluster_arg = match cluster.strip_prefix("gen:") {
        Some(rest) => format!("gen:seed={seed},gpu_only={gpu_only_flag},{rest}"),
        None => cluster.to_string(),
    };
    let mut network = load_cluster(&cluster_arg)?;
    if gpu_only_flag {
        network = gpu_only(&network);
    }
    let trace_arg = match trace.strip_prefix("gen:") {
        Some(rest) => format!("gen:seed={seed},horizon={slots},{rest}"),
        None => trace.to_string(),
    };
    let loaded = load_trace_arg(&trace_arg, gpu_only_flag)?;
    for job in &loaded.jobs {
        job.validate(network.resource_count())
            .map_err(|e| HarnessError::Config(format!("trace does not match cluster resources: {e}")))?;
    }
    Ok(Environment { network, jobs: loaded.jobs, warnings: loaded.warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub policy: String,
    pub seed: u64,
    /// Job count, node multiplier or edge multiplier.
    pub point: f64,
    pub jobs: usize,
    pub total_utility: f64,
    pub mean_embedded_ratio: f64,
    pub strict_violation_slots: u32,
    pub completed_jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxRow {
    pub seed: u64,
    pub slot: u32,
    pub gadget_utility: f64,
    pub oracle_utility: f64,
    pub ratio: f64,
    /// Whether rounding met its utility target in this slot.
    pub accepted: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<RunRow>,
    pub approx: Vec<ApproxRow>,
    /// `(file stem, log)`
    pub logs: Vec<(String, RunLog)>,
    pub skipped: Vec<String>,
    pub warnings: Vec<String>,
}

impl ExperimentOutput {
    /// Mean embedded ratio per sweep point for one policy.
    pub fn mean_ratio_by_point(&self, policy: &str) -> Vec<(f64, f64)> {
        let rows = self.rows.iter().filter(|r| r.policy == policy);
        grouped_means(rows.map(|r| (OrdF64(r.point), r.mean_embedded_ratio))).into_iter().map(|(k, v)| (k.0, v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let mut out = ExperimentOutput::default();
    for seed in cfg.trial_seeds() {
        let env = environment(&cfg.cluster, &cfg.trace, seed, cfg.slots, cfg.gpu_only)?;
        out.warnings.extend(env.warnings.iter().map(|w| format!("seed {seed}: {w}")));
        if cfg.scenario == Scenario::Approx {
            approx_trial(cfg, seed, &env, &mut out);
            continue;
        }
        for &point in &cfg.points {
            let (net, jobs) = match cfg.scenario {
                Scenario::Utility => {
                    let n = (point * env.jobs.len() as f64).round() as usize;
                    (env.network.clone(), env.jobs[..n.min(env.jobs.len())].to_vec())
                }
                Scenario::NodeRatio => (env.network.scaled(point, 1.0), env.jobs.clone()),
                Scenario::EdgeRatio => (env.network.scaled(1.0, EDGE_SWEEP_BASE * point), env.jobs.clone()),
                Scenario::Approx => unreachable!(),
            };
            let row_point = if cfg.scenario == Scenario::Utility { jobs.len() as f64 } else { point };
            for policy in &cfg.policies {
                log::info!("{} seed {seed} point {row_point}: {}", cfg.scenario.name(), policy.name());
                let run = run_online(&jobs, &net, policy.build(&cfg.gvne, seed).as_mut(), cfg.slots);
                let m = RunMetrics::from_run(policy.name(), seed, &run, &jobs, &net);
                out.rows.push(RunRow {
                    policy: policy.name().into(),
                    seed,
                    point: row_point,
                    jobs: jobs.len(),
                    total_utility: m.total_utility,
                    mean_embedded_ratio: m.mean_embedded_ratio(),
                    strict_violation_slots: m.strict_violation_slots,
                    completed_jobs: m.completed_jobs,
                });
                if cfg.keep_logs {
                    let stem = format!("{}_{}_p{}_s{seed}", cfg.scenario.name(), policy.name(), row_point);
                    out.logs.push((stem, RunLog::new(*policy, seed, &cfg.gvne, &net, &jobs, &run)));
                }
            }
        }
    }
    Ok(out)
}

fn approx_trial(cfg: &ExperimentConfig, seed: u64, env: &Environment, out: &mut ExperimentOutput) {
    let policy = PolicyChoice::Gadget;
    let run = run_online(&env.jobs, &env.network, policy.build(&cfg.gvne, seed).as_mut(), cfg.slots);
    for (t, alloc) in (1..).zip(run.schedule.slots()) {
        let z = run.schedule.accumulators_at(t - 1);
        let pairs: Vec<(&Job, u64)> = active_set(t, &env.jobs, &z).into_iter().map(|j| (j, z[&j.id])).collect();
        let instance = GvneInstance::new(t, &env.network, &pairs);
        let oracle = match exact_oracle(&instance, OracleLimits::default()) {
            Ok(o) => o,
            Err(e) => {
                log::warn!("seed {seed} slot {t}: oracle skipped: {e}");
                out.skipped.push(format!("seed {seed} slot {t}: {e}"));
                continue;
            }
        };
        if oracle.utility <= 0.0 {
            continue;
        }
        let by_id: BTreeMap<_, _> = env.jobs.iter().map(|j| (j.id, j)).collect();
        let gadget_utility: f64 =
            alloc.embeddings.iter().map(|(id, e)| incremental_utility(by_id[id], z[id], e.size())).sum();
        let accepted = run.records[t as usize - 1].diagnostics.as_ref().is_some_and(|d| d.accepted);
        out.approx.push(ApproxRow {
            seed,
            slot: t,
            gadget_utility,
            oracle_utility: oracle.utility,
            ratio: gadget_utility / oracle.utility,
            accepted,
        });
    }
    if cfg.keep_logs {
        out.logs.push((format!("approx_gadget_s{seed}"), RunLog::new(policy, seed, &cfg.gvne, &env.network, &env.jobs, &run)));
    }
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Io(e.to_string())
}

/// Writes `<scenario>.csv`, a per-point summary for sweeps, and run logs
/// under `runs/` when kept.
pub fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let name = cfg.scenario.name();
    if cfg.scenario == Scenario::Approx {
        let mut w = csv::Writer::from_path(dir.join(format!("{name}.csv"))).map_err(csv_err)?;
        w.write_record(["seed", "slot", "gadget_utility", "oracle_utility", "ratio"]).map_err(csv_err)?;
        for r in &out.approx {
            let rec = [r.seed.to_string(), r.slot.to_string(), r.gadget_utility.to_string(), r.oracle_utility.to_string(), r.ratio.to_string()];
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
    } else {
        let point = cfg.scenario.point_column();
        let mut w = csv::Writer::from_path(dir.join(format!("{name}.csv"))).map_err(csv_err)?;
        let head = ["policy", "seed", point, "total_utility", "mean_embedded_ratio", "strict_violation_slots", "completed_jobs"];
        w.write_record(head).map_err(csv_err)?;
        for r in &out.rows {
            let rec = [
                r.policy.clone(),
                r.seed.to_string(),
                r.point.to_string(),
                r.total_utility.to_string(),
                r.mean_embedded_ratio.to_string(),
                r.strict_violation_slots.to_string(),
                r.completed_jobs.to_string(),
            ];
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;

        let mut w = csv::Writer::from_path(dir.join(format!("{name}_summary.csv"))).map_err(csv_err)?;
        w.write_record(["policy", point, "trials", "mean_total_utility", "mean_embedded_ratio"]).map_err(csv_err)?;
        for policy in &cfg.policies {
            let mut groups: BTreeMap<OrdF64, Vec<&RunRow>> = BTreeMap::new();
            for r in out.rows.iter().filter(|r| r.policy == policy.name()) {
                groups.entry(OrdF64(r.point)).or_default().push(r);
            }
            for (p, rows) in groups {
                let n = rows.len() as f64;
                let rec = [
                    policy.name().to_string(),
                    p.0.to_string(),
                    rows.len().to_string(),
                    (rows.iter().map(|r| r.total_utility).sum::<f64>() / n).to_string(),
                    (rows.iter().map(|r| r.mean_embedded_ratio).sum::<f64>() / n).to_string(),
                ];
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.flush().map_err(io)?;
    }
    if !out.logs.is_empty() {
        let runs = dir.join("runs");
        std::fs::create_dir_all(&runs).map_err(io)?;
        for (stem, log) in &out.logs {
            log.write(&runs.join(format!("{stem}.json")))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: Scenario) -> ExperimentConfig {
        ExperimentConfig {
            cluster: "gen:servers=3,racks=1-1".into(),
            trace: "gen:jobs=4,utility=sqrt".into(),
            slots: 3,
            trials: 1,
            ..ExperimentConfig::new(scenario)
        }
    }

    #[test]
    fn zero_jobs_give_zero_utility() {
        let cfg = ExperimentConfig {
            policies: PolicyChoice::ALL.iter().map(|p| PolicyChoice::parse(p).unwrap()).collect(),
            trace: "gen:jobs=0".into(),
            points: vec![1.0],
            ..small(Scenario::Utility)
        };
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 4);
        assert!(out.rows.iter().all(|r| r.total_utility == 0.0 && r.jobs == 0));
    }

    #[test]
    fn outputs_are_reproducible() {
        let cfg = ExperimentConfig { policies: vec![PolicyChoice::Gadget, PolicyChoice::parse("las").unwrap()], ..small(Scenario::NodeRatio) };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_outputs(&cfg, &run_experiment(&cfg).unwrap(), a.path()).unwrap();
        write_outputs(&cfg, &run_experiment(&cfg).unwrap(), b.path()).unwrap();
        for f in ["node-ratio.csv", "node-ratio_summary.csv"] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            assert_eq!(x, std::fs::read(b.path().join(f)).unwrap());
            assert!(!x.is_empty());
        }
    }

    #[test]
    fn approx_schema() {
        let cfg = ExperimentConfig { trials: 2, ..ExperimentConfig::new(Scenario::Approx) };
        let out = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&cfg, &out, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("approx.csv")).unwrap();
        assert!(text.starts_with("seed,slot,gadget_utility,oracle_utility,ratio\n"));
        assert!(!out.approx.is_empty());
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = ExperimentConfig { policies: vec![PolicyChoice::parse("fifo").unwrap()], ..ExperimentConfig::new(Scenario::Approx) };
        assert!(run_experiment(&cfg).is_err());
        assert!(Scenario::parse("nope").is_err());
        assert!(PolicyChoice::parse("srtf").is_err());
    }
}
