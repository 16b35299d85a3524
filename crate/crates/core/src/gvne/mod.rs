//! Per-slot generalized virtual network embedding: ring-size selection by
//! LP relaxation, an anchored augmented LP, decomposition into weighted
//! integral embeddings and randomized rounding, plus an exact oracle for
//! small instances.

pub mod decompose;
pub mod ilp;
pub mod instance;
pub mod oracle;
pub mod rounding;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, Backend, LinearProgram, LpSolution, LpStatus};
use crate::model::{JobId, SlotAllocation};

pub use decompose::{decompose, MappingSelection};
pub use ilp::{build_augmented_lp, build_ilp, select_ring_sizes, IlpModel, RingChoice, RingSelection};
pub use instance::{incremental_utility, placement_cap, worker_upper_bound, Exclusion, GvneInstance, InstanceJob};
pub use oracle::{exact_oracle, OracleLimits, OracleResult};
pub use rounding::{randomized_round, violation_factors, RoundingOutcome, ViolationFactors};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GvneError {
    #[error("job {0} is not active in this slot")]
    InactiveJob(JobId),
    #[error("violation factors need at least 3 substrate nodes, found {0}")]
    TooFewNodes(usize),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("instance exceeds oracle limits: {0}")]
    OracleLimit(String),
}

/// Which anchor servers the augmented LP builds copies for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorSet {
    /// Every candidate server.
    All,
    /// Servers used by the chosen ring size in the selection LP.
    #[default]
    Support,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GvneConfig {
    pub epsilon: f64,
    pub rounds: u32,
    pub alpha: f64,
    pub backend: Backend,
    pub anchors: AnchorSet,
    /// Objective bonus per granted worker; see [`GvneInstance::idle_weight`].
    pub idle_weight: f64,
}

impl Default for GvneConfig {
    fn default() -> Self {
        GvneConfig {
            epsilon: 0.5,
            rounds: 100,
            alpha: 1.0 / 3.0,
            backend: Backend::Auto,
            anchors: AnchorSet::Support,
            idle_weight: 1e-6,
        }
    }
}

impl GvneConfig {
    pub fn validate(&self) -> Result<(), GvneError> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(GvneError::BadConfig(format!("epsilon {} must be >= 0", self.epsilon)));
        }
        if self.rounds < 1 {
            return Err(GvneError::BadConfig("rounds must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(GvneError::BadConfig(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.idle_weight >= 0.0 && self.idle_weight.is_finite()) {
            return Err(GvneError::BadConfig(format!("idle weight {} must be >= 0", self.idle_weight)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpStats {
    pub vars: usize,
    pub rows: usize,
    pub status: LpStatus,
    pub objective: Option<f64>,
}

impl LpStats {
    fn of(lp: &LinearProgram, sol: &LpSolution) -> Self {
        LpStats {
            vars: lp.num_vars(),
            rows: lp.num_constraints(),
            status: sol.status.clone(),
            objective: sol.is_optimal().then_some(sol.objective),
        }
    }
}

/// Structured per-slot record of every stage of [`solve_slot`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotDiagnostics {
    pub slot: u32,
    pub considered: Vec<JobId>,
    pub excluded: Vec<Exclusion>,
    pub selection_lp: Option<LpStats>,
    pub augmented_lp: Option<LpStats>,
    /// `(job, κ_i)`
    pub ring_sizes: Vec<(JobId, u32)>,
    pub rejected: Vec<JobId>,
    pub tuples: usize,
    pub stalled_mass: f64,
    pub repaired: u32,
    pub factors: Option<ViolationFactors>,
    pub rounds: u32,
    pub accepted: bool,
    pub utility: f64,
    pub lp_utility: f64,
    pub dropped: Vec<JobId>,
    pub violations: Vec<String>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub allocation: SlotAllocation,
    pub diagnostics: SlotDiagnostics,
}

/// Selection LP, ring sizes, augmented LP, decomposition and rounding for
/// one slot. Stage failures leave the affected jobs unembedded and are
/// recorded in the diagnostics.
pub fn solve_slot(instance: &GvneInstance, config: &GvneConfig, rng: &mut impl Rng) -> SlotOutcome {
    let instance = instance.clone().with_idle_weight(config.idle_weight);
    let mut diag = SlotDiagnostics {
        slot: instance.slot,
        considered: instance.jobs.iter().map(|j| j.id()).collect(),
        excluded: instance.excluded.clone(),
        accepted: true,
        ..Default::default()
    };
    let empty = |diag: SlotDiagnostics| SlotOutcome { allocation: SlotAllocation::empty(instance.slot), diagnostics: diag };
    if let Err(e) = config.validate() {
        diag.errors.push(e.to_string());
        return empty(diag);
    }
    if instance.is_empty() {
        return empty(diag);
    }

    let model = build_ilp(&instance);
    let sol = lp::solve_with(&model.lp, config.backend);
    diag.selection_lp = Some(LpStats::of(&model.lp, &sol));
    if !sol.is_optimal() {
        diag.errors.push(format!("selection LP: {:?}", sol.status));
        return empty(diag);
    }
    let selection = select_ring_sizes(&model, &sol);
    diag.ring_sizes = selection.chosen.iter().map(|c| (c.job, c.size)).collect();
    diag.rejected = selection.rejected.clone();
    if selection.chosen.is_empty() {
        return empty(diag);
    }

    let aug = match config.anchors {
        AnchorSet::All => build_augmented_lp(&instance, &selection.chosen, ilp::all_anchors(&instance)),
        AnchorSet::Support => build_augmented_lp(&instance, &selection.chosen, ilp::support_anchors(&instance)),
    };
    let aug_sol = lp::solve_with(&aug.lp, config.backend);
    diag.augmented_lp = Some(LpStats::of(&aug.lp, &aug_sol));
    if !aug_sol.is_optimal() {
        diag.errors.push(format!("augmented LP: {:?}", aug_sol.status));
        return empty(diag);
    }
    let selections = decompose(&aug, &aug_sol, &instance);
    diag.tuples = selections.iter().map(|s| s.tuples.len()).sum();
    diag.stalled_mass = selections.iter().map(|s| s.stalled).sum();
    diag.repaired = selections.iter().map(|s| s.repaired).sum();

    let factors = violation_factors(&instance, config.epsilon).unwrap_or_else(|e| {
        diag.errors.push(format!("{e}; using strict capacities"));
        ViolationFactors::strict(instance.network.resource_count())
    });
    let out = randomized_round(&selections, &factors, config.rounds, config.alpha, &instance, rng);
    diag.factors = Some(factors);
    diag.rounds = out.rounds;
    diag.accepted = out.accepted;
    diag.utility = out.utility;
    diag.lp_utility = out.lp_utility;
    diag.dropped = out.dropped;
    diag.violations = out.violations;
    SlotOutcome { allocation: out.allocation, diagnostics: diag }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::model::{Edge, Job, Node, NodeKind, ResourceVector, SubstrateNetwork};
    use crate::rartime::UtilitySpec;

    fn server(id: usize, gpus: f64) -> Node {
        Node { id, kind: NodeKind::Server, capacity: ResourceVector(vec![gpus, 64.0 * gpus]), rack: Some(0) }
    }

    fn resources() -> Vec<String> {
        vec!["gpu".into(), "mem".into()]
    }

    /// Servers hanging off one switch; a lone server gets no switch.
    pub fn servers_net(gpus: &[f64], bandwidth: f64) -> SubstrateNetwork {
        let mut nodes: Vec<Node> = gpus.iter().enumerate().map(|(i, &g)| server(i, g)).collect();
        let mut edges = Vec::new();
        if gpus.len() > 1 {
            let sw = gpus.len();
            nodes.push(Node { id: sw, kind: NodeKind::Switch, capacity: ResourceVector(vec![0.0, 0.0]), rack: None });
            for i in 0..gpus.len() {
                edges.push(Edge { from: i, to: sw, bandwidth });
                edges.push(Edge { from: sw, to: i, bandwidth });
            }
        }
        SubstrateNetwork::new(resources(), nodes, edges).unwrap()
    }

    /// Two 4-GPU servers joined by a link in each direction.
    pub fn pair_net(bandwidth: f64) -> SubstrateNetwork {
        let nodes = vec![server(0, 4.0), server(1, 4.0)];
        let edges = vec![Edge { from: 0, to: 1, bandwidth }, Edge { from: 1, to: 0, bandwidth }];
        SubstrateNetwork::new(resources(), nodes, edges).unwrap()
    }

    /// Three one-GPU servers on a one-way cycle 0 -> 1 -> 2 -> 0.
    pub fn triangle_net() -> SubstrateNetwork {
        let nodes = (0..3).map(|i| server(i, 1.0)).collect();
        let edges = (0..3).map(|i| Edge { from: i, to: (i + 1) % 3, bandwidth: 1e9 }).collect();
        SubstrateNetwork::new(resources(), nodes, edges).unwrap()
    }

    pub fn gpu_job(id: u32, max_workers: u32) -> Job {
        Job {
            id,
            arrival: 1,
            max_workers,
            demand: ResourceVector(vec![1.0, 8.0]),
            budget: ResourceVector(vec![100.0, 800.0]),
            bandwidth: 1e8,
            efficiency: 1.0,
            utility: UtilitySpec::Sqrt { c: 1.0 },
            rar: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::model::{validate_slot_relaxed, Job};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn empty_instance() {
        let net = servers_net(&[4.0, 4.0], 1e9);
        let inst = GvneInstance::new(1, &net, &[]);
        let out = solve_slot(&inst, &GvneConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(out.allocation.embedded_jobs(), 0);
        assert!(out.diagnostics.errors.is_empty());
    }

    #[test]
    fn triangle_within_third_of_oracle() {
        let net = triangle_net();
        let j = gpu_job(1, 3);
        let inst = GvneInstance::new(1, &net, &[(&j, 0)]);
        let best = exact_oracle(&inst, OracleLimits::default()).unwrap().utility;
        for seed in 0..10 {
            let out = solve_slot(&inst, &GvneConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(out.diagnostics.utility >= best / 3.0 - 1e-9, "{:?}", out.diagnostics);
        }
    }

    #[test]
    fn output_respects_relaxed_capacities() {
        let net = servers_net(&[2.0, 4.0, 1.0, 2.0], 1e9);
        let jobs: Vec<Job> = (1..=4).map(|i| gpu_job(i, 3)).collect();
        let active: Vec<(&Job, u64)> = jobs.iter().map(|j| (j, 0)).collect();
        let inst = GvneInstance::new(1, &net, &active);
        for seed in 0..5 {
            let out = solve_slot(&inst, &GvneConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed));
            let slack = out.diagnostics.factors.as_ref().unwrap().slack();
            let v = validate_slot_relaxed(&out.allocation, &jobs, &net, &BTreeMap::new(), &slack).unwrap();
            assert!(v.is_empty(), "{v:?}");
            assert!(out.diagnostics.utility > 0.0);
        }
    }
}
