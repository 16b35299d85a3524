use serde::{Deserialize, Serialize};

use crate::model::{Job, JobId, NodeId, SubstrateNetwork};

use super::GvneError;

/// An active job as seen by one slot's embedding problem.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceJob {
    pub job: Job,
    pub z_prev: u64,
    /// `q_i[t]`; candidate ring sizes are `1..=upper_bound`.
    pub upper_bound: u32,
    /// `π_{i,κ}` for κ = 1..=upper_bound.
    pub increments: Vec<f64>,
    pub candidates: Vec<NodeId>,
}

impl InstanceJob {
    pub fn id(&self) -> JobId {
        self.job.id
    }

    pub fn ring_sizes(&self) -> impl Iterator<Item = u32> {
        1..=self.upper_bound
    }

    pub fn increment(&self, size: u32) -> f64 {
        if size == 0 {
            0.0
        } else {
            self.increments[size as usize - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub job: JobId,
    pub reason: String,
}

/// The per-slot embedding problem: active jobs with their accumulated
/// progress, candidate ring sizes and incremental utilities.
#[derive(Debug, Clone)]
pub struct GvneInstance<'a> {
    pub slot: u32,
    pub network: &'a SubstrateNetwork,
    pub jobs: Vec<InstanceJob>,
    pub excluded: Vec<Exclusion>,
    /// Objective bonus per granted worker, used only to break ties among
    /// optimal LP vertices in favour of using idle capacity.
    pub idle_weight: f64,
}

impl<'a> GvneInstance<'a> {
    /// Builds the instance for slot `slot` from `(job, z_{i,t-1})` pairs.
    /// Jobs whose ring-size set would be empty are listed in `excluded`.
    pub fn new(slot: u32, network: &'a SubstrateNetwork, active: &[(&Job, u64)]) -> Self {
        let mut jobs = Vec::new();
        let mut excluded = Vec::new();
        for &(job, z_prev) in active {
            match worker_upper_bound(job, z_prev, slot, network) {
                Ok(0) => excluded.push(Exclusion {
                    job: job.id,
                    reason: "no ring size fits worker cap, budget and capacity".into(),
                }),
                Ok(q) => {
                    let increments = (1..=q).map(|k| incremental_utility(job, z_prev, k)).collect();
                    jobs.push(InstanceJob {
                        job: job.clone(),
                        z_prev,
                        upper_bound: q,
                        increments,
                        candidates: candidate_servers(job, network),
                    });
                }
                Err(e) => excluded.push(Exclusion { job: job.id, reason: e.to_string() }),
            }
        }
        GvneInstance { slot, network, jobs, excluded, idle_weight: 0.0 }
    }

    pub fn with_idle_weight(mut self, weight: f64) -> Self {
        self.idle_weight = weight;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    /// LP objective coefficient for granting job `idx` a ring of `size`.
    pub fn objective_coeff(&self, idx: usize, size: u32) -> f64 {
        self.jobs[idx].increment(size) + self.idle_weight * size as f64
    }

    /// Largest ring size offered to any job (Γ).
    pub fn max_ring(&self) -> u32 {
        self.jobs.iter().map(|j| j.upper_bound).max().unwrap_or(0)
    }
}

/// Servers able to host at least one worker of `job` in every resource.
pub fn candidate_servers(job: &Job, net: &SubstrateNetwork) -> Vec<NodeId> {
    net.servers()
        .filter(|n| n.capacity.iter().zip(job.demand.iter()).all(|(c, d)| d <= c + 1e-9))
        .map(|n| n.id)
        .collect()
}

/// Workers the cluster could host for `job` if it were alone: per resource,
/// the sum over servers of whole workers that fit.
fn capacity_share(job: &Job, net: &SubstrateNetwork) -> u32 {
    net.servers().map(|n| n.capacity.copies_of(&job.demand).unwrap_or(0)).sum()
}

/// `q_i[t]`: ring-size upper bound from the continuous relaxation of the
/// slot problem: worker cap, remaining budget and cluster capacity share.
pub fn worker_upper_bound(job: &Job, z_prev: u64, slot: u32, net: &SubstrateNetwork) -> Result<u32, GvneError> {
    if slot < job.arrival || job.headroom(z_prev) == 0 && job.budget_worker_slots() <= z_prev as f64 {
        return Err(GvneError::InactiveJob(job.id));
    }
    Ok(job.max_workers.min(job.headroom(z_prev)).min(capacity_share(job, net)))
}

/// `Π_i = min{N_i, C^r/l^r, F^r/l^r}` with cluster-wide capacity.
pub fn placement_cap(job: &Job, net: &SubstrateNetwork) -> f64 {
    let total = net.total_capacity();
    let cap = total
        .iter()
        .zip(job.demand.iter())
        .filter(|(_, d)| *d > 0.0)
        .map(|(c, d)| c / d)
        .fold(f64::INFINITY, f64::min);
    (job.max_workers as f64).min(cap).min(job.budget_worker_slots())
}

/// `π_{i,κ} = μ(ζ z + ζ κ) − μ(ζ z)`.
pub fn incremental_utility(job: &Job, z_prev: u64, size: u32) -> f64 {
    let base = job.efficiency * z_prev as f64;
    job.utility.value(base + job.efficiency * size as f64) - job.utility.value(base)
}
