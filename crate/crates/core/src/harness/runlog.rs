use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gvne::GvneConfig;
use crate::model::{validate_slot, CapacitySlack, validate_slot_relaxed, Job, JobId, Schedule, SlotAllocation, SubstrateNetwork, Violation};
use crate::scheduler::{objective, step, RunResult, SlotRecord};

use super::experiment::PolicyChoice;
use super::HarnessError;

pub const RUN_LOG_VERSION: u32 = 1;

/// Everything needed to audit a run and replay any of its slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub version: u32,
    pub policy: PolicyChoice,
    pub seed: u64,
    pub slots: u32,
    pub gvne: GvneConfig,
    pub network: SubstrateNetwork,
    pub jobs: Vec<Job>,
    pub allocations: Vec<SlotAllocation>,
    pub records: Vec<SlotRecord>,
    pub objective: f64,
}

impl RunLog {
    pub fn new(
        policy: PolicyChoice,
        seed: u64,
        gvne: &GvneConfig,
        network: &SubstrateNetwork,
        jobs: &[Job],
        run: &RunResult,
    ) -> Self {
        RunLog {
            version: RUN_LOG_VERSION,
            policy,
            seed,
            slots: run.schedule.len(),
            gvne: gvne.clone(),
            network: network.clone(),
            jobs: jobs.to_vec(),
            allocations: run.schedule.slots().to_vec(),
            records: run.records.clone(),
            objective: objective(&run.schedule, jobs),
        }
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let log: RunLog =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        if log.version != RUN_LOG_VERSION {
            return Err(HarnessError::Config(format!("unsupported run log version {}", log.version)));
        }
        Ok(log)
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string(self).map_err(|e| HarnessError::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub slots: u32,
    /// Violations against the capacity multipliers each slot was entitled to.
    pub violations: Vec<(u32, Violation)>,
    pub strict_slots: u32,
    /// `(job, resource)` pairs whose total use exceeds `F_i^r`.
    pub budget_breaches: Vec<(JobId, usize)>,
    pub objective: f64,
    pub objective_matches: bool,
    /// Slots whose replayed allocation differs from the logged one.
    pub replay_mismatches: Vec<u32>,
    pub structural: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
            && self.budget_breaches.is_empty()
            && self.objective_matches
            && self.replay_mismatches.is_empty()
            && self.structural.is_empty()
    }
}

/// Rebuilds the schedule from the logged allocations and checks every hard
/// constraint, each job's per-resource budget and the logged objective.
/// With `replay`, each slot is recomputed from the logged state and
/// compared with what was logged.
pub fn audit(log: &RunLog, replay: bool) -> Result<AuditReport, HarnessError> {
    let net = &log.network;
    for job in &log.jobs {
        job.validate(net.resource_count())?;
    }
    let mut report = AuditReport { slots: log.allocations.len() as u32, ..Default::default() };
    if log.records.len() != log.allocations.len() {
        report.structural.push(format!("{} records for {} slots", log.records.len(), log.allocations.len()));
    }
    let mut schedule = Schedule::new(&log.jobs);
    let mut policy = replay.then(|| log.policy.build(&log.gvne, log.seed));
    for (i, alloc) in log.allocations.iter().enumerate() {
        let t = i as u32 + 1;
        if alloc.slot != t {
            report.structural.push(format!("allocation {i} is labelled slot {}", alloc.slot));
            return Ok(report);
        }
        let z_prev = schedule.accumulators_at(t - 1);
        let slack = log.records.get(i).map_or_else(|| CapacitySlack::strict(net.resource_count()), |r| r.slack.clone());
        for v in validate_slot_relaxed(alloc, &log.jobs, net, &z_prev, &slack)? {
            report.violations.push((t, v));
        }
        if validate_slot(alloc, &log.jobs, net, &z_prev)?.is_empty() {
            report.strict_slots += 1;
        }
        if let Some(p) = policy.as_mut() {
            let (again, _) = step(&log.jobs, net, p.as_mut(), t, &z_prev);
            if &again != alloc {
                report.replay_mismatches.push(t);
            }
        }
        schedule.push(alloc.clone(), &log.jobs);
    }

    let used: BTreeMap<JobId, u64> = log.jobs.iter().map(|j| (j.id, schedule.final_accumulated(j.id))).collect();
    for job in &log.jobs {
        for r in 0..net.resource_count() {
            if job.demand.get(r) * used[&job.id] as f64 > job.budget.get(r) {
                report.budget_breaches.push((job.id, r));
            }
        }
    }
    report.objective = objective(&schedule, &log.jobs);
    report.objective_matches = report.objective == log.objective;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::environment;
    use crate::model::Embedding;
    use crate::scheduler::run_online;

    fn logged(policy: &str) -> RunLog {
        let env = environment("gen:servers=4", "gen:jobs=6", 5, 6, false).unwrap();
        let choice = PolicyChoice::parse(policy).unwrap();
        let gvne = GvneConfig::default();
        let run = run_online(&env.jobs, &env.network, choice.build(&gvne, 5).as_mut(), 6);
        RunLog::new(choice, 5, &gvne, &env.network, &env.jobs, &run)
    }

    #[test]
    fn honest_runs_pass_with_replay() {
        for p in ["gadget", "drf"] {
            let log = logged(p);
            let back: RunLog = serde_json::from_str(&serde_json::to_string(&log).unwrap()).unwrap();
            let report = audit(&back, true).unwrap();
            assert!(report.passed(), "{p}: {report:?}");
        }
    }

    #[test]
    fn tampering_is_caught() {
        let mut log = logged("las");
        log.objective += 1.0;
        assert!(!audit(&log, false).unwrap().passed());

        let mut log = logged("las");
        let job = log.jobs[0].clone();
        let last = log.allocations.last_mut().unwrap();
        last.insert(Embedding::colocated(job.id, 0, job.max_workers + 1));
        let report = audit(&log, true).unwrap();
        assert!(!report.violations.is_empty());
        assert_eq!(report.replay_mismatches, vec![log.slots]);
    }
}
