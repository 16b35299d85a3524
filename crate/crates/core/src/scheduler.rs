//! The online temporally greedy loop: one allocation per slot, chosen by a
//! pluggable policy from the jobs that have arrived and still have budget.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gvne::{solve_slot, GvneConfig, GvneInstance, SlotDiagnostics};
use crate::model::{CapacitySlack, Job, JobId, Schedule, SlotAllocation, SubstrateNetwork};

/// `I[t]`: jobs with `t >= a_i` and `z_{i,t-1} < min_r F_i^r / l_i^r`.
pub fn active_set<'a>(t: u32, jobs: &'a [Job], z_prev: &BTreeMap<JobId, u64>) -> Vec<&'a Job> {
    jobs.iter()
        .filter(|j| t >= j.arrival && (z_prev.get(&j.id).copied().unwrap_or(0) as f64) < j.budget_worker_slots())
        .collect()
}

/// Everything a policy may look at when allocating slot `slot`.
pub struct SlotContext<'a> {
    pub slot: u32,
    pub network: &'a SubstrateNetwork,
    pub active: Vec<&'a Job>,
    pub z_prev: &'a BTreeMap<JobId, u64>,
}

impl SlotContext<'_> {
    pub fn z(&self, job: JobId) -> u64 {
        self.z_prev.get(&job).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub allocation: SlotAllocation,
    /// Capacity multipliers the allocation is entitled to.
    pub slack: CapacitySlack,
    pub diagnostics: Option<SlotDiagnostics>,
}

pub trait SlotPolicy {
    fn name(&self) -> &str;
    fn allocate(&mut self, ctx: &SlotContext) -> PolicyOutput;
}

/// Per-slot randomness derived from the run seed, so any slot can be
/// replayed on its own.
pub fn slot_rng(seed: u64, slot: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(slot as u64);
    rng
}

/// The LP-based per-slot embedding policy.
#[derive(Debug, Clone)]
pub struct Gadget {
    pub config: GvneConfig,
    pub seed: u64,
}

impl Gadget {
    pub fn new(config: GvneConfig, seed: u64) -> Self {
        Gadget { config, seed }
    }
}

impl SlotPolicy for Gadget {
    fn name(&self) -> &str {
        "gadget"
    }

    fn allocate(&mut self, ctx: &SlotContext) -> PolicyOutput {
        let pairs: Vec<(&Job, u64)> = ctx.active.iter().map(|j| (*j, ctx.z(j.id))).collect();
        let instance = GvneInstance::new(ctx.slot, ctx.network, &pairs);
        let out = solve_slot(&instance, &self.config, &mut slot_rng(self.seed, ctx.slot));
        let slack = match &out.diagnostics.factors {
            Some(f) => f.slack(),
            None => CapacitySlack::strict(ctx.network.resource_count()),
        };
        PolicyOutput { allocation: out.allocation, slack, diagnostics: Some(out.diagnostics) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u32,
    pub active: Vec<JobId>,
    pub slack: CapacitySlack,
    /// Embeddings removed because they broke the worker cap, the budget
    /// headroom or the arrival rule.
    pub removed: Vec<JobId>,
    pub diagnostics: Option<SlotDiagnostics>,
}

impl SlotRecord {
    /// Fraction of active jobs that received workers.
    pub fn embedded_ratio(&self, alloc: &SlotAllocation) -> Option<f64> {
        (!self.active.is_empty()).then(|| alloc.embedded_jobs() as f64 / self.active.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub schedule: Schedule,
    pub records: Vec<SlotRecord>,
}

/// Runs slots `1..=slots`, updating `z_{i,t} = z_{i,t-1} + Σ_s y_{is}[t]`.
pub fn run_online(jobs: &[Job], net: &SubstrateNetwork, policy: &mut dyn SlotPolicy, slots: u32) -> RunResult {
    let mut schedule = Schedule::new(jobs);
    let mut records = Vec::with_capacity(slots as usize);
    for t in 1..=slots {
        let z_prev = schedule.accumulators_at(t - 1);
        let (alloc, record) = step(jobs, net, policy, t, &z_prev);
        records.push(record);
        schedule.push(alloc, jobs);
    }
    RunResult { schedule, records }
}

/// One slot of the online loop given `z_{·,t-1}`. Worker caps, budget
/// headroom and arrivals are enforced here whatever the policy returns.
pub fn step(
    jobs: &[Job],
    net: &SubstrateNetwork,
    policy: &mut dyn SlotPolicy,
    t: u32,
    z_prev: &BTreeMap<JobId, u64>,
) -> (SlotAllocation, SlotRecord) {
    let by_id: BTreeMap<JobId, &Job> = jobs.iter().map(|j| (j.id, j)).collect();
    let active = active_set(t, jobs, z_prev);
    let active_ids: Vec<JobId> = active.iter().map(|j| j.id).collect();
    let ctx = SlotContext { slot: t, network: net, active, z_prev };
    let out = policy.allocate(&ctx);

    let mut alloc = SlotAllocation::empty(t);
    let mut removed = Vec::new();
    for (id, emb) in out.allocation.embeddings {
        let z = z_prev.get(&id).copied().unwrap_or(0);
        let ok = active_ids.contains(&id)
            && by_id.get(&id).is_some_and(|j| emb.size() <= j.max_workers && emb.size() <= j.headroom(z));
        if ok {
            alloc.insert(emb);
        } else {
            log::warn!("slot {t}: {} returned an inadmissible embedding for job {id}", policy.name());
            removed.push(id);
        }
    }
    (alloc, SlotRecord { slot: t, active: active_ids, slack: out.slack, removed, diagnostics: out.diagnostics })
}

/// `F(E) = Σ_i μ_i(ζ_i z_{i,T})`.
pub fn objective(schedule: &Schedule, jobs: &[Job]) -> f64 {
    objective_at(&schedule.accumulators_at(schedule.len()), jobs)
}

pub fn objective_at(z: &BTreeMap<JobId, u64>, jobs: &[Job]) -> f64 {
    jobs.iter().map(|j| j.utility.value(j.efficiency * z.get(&j.id).copied().unwrap_or(0) as f64)).sum()
}

/// Worker-slots each job receives from a set of slot allocations.
pub fn accumulate<'a>(allocs: impl IntoIterator<Item = &'a SlotAllocation>) -> BTreeMap<JobId, u64> {
    let mut z = BTreeMap::new();
    for a in allocs {
        for (id, emb) in &a.embeddings {
            *z.entry(*id).or_insert(0) += emb.size() as u64;
        }
    }
    z
}

/// `F(E ∪ {v}) − F(E)` for a schedule summarised by its accumulators,
/// summed job by job in id order.
pub fn marginal_gain(z: &BTreeMap<JobId, u64>, v: &SlotAllocation, jobs: &[Job]) -> f64 {
    let mut gain = 0.0;
    for j in jobs {
        let add = v.workers(j.id) as u64;
        if add == 0 {
            continue;
        }
        let base = z.get(&j.id).copied().unwrap_or(0);
        gain += j.utility.value(j.efficiency * (base + add) as f64) - j.utility.value(j.efficiency * base as f64);
    }
    gain
}
