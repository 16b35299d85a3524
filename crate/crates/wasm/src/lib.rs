//! Browser bindings for the demo page. Every call takes and returns JSON
//! strings.

use std::collections::BTreeMap;

use ringsched::gvne::{exact_oracle, incremental_utility, solve_slot, GvneConfig, GvneInstance, OracleLimits};
use ringsched::harness::experiment::{environment, ExperimentConfig, PolicyChoice, Scenario};
use ringsched::harness::metrics::RunMetrics;
use ringsched::model::{Job, SlotAllocation};
use ringsched::rartime::RarParams;
use ringsched::scheduler::{active_set, objective_at, run_online, slot_rng};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Curve {
    workers: Vec<u32>,
    seconds: Vec<f64>,
    asymptote: f64,
}

pub fn rar_curve_json(params: &str, max_workers: u32) -> Result<String, String> {
    let p: RarParams = serde_json::from_str(params).map_err(|e| e.to_string())?;
    p.validate().map_err(|e| e.to_string())?;
    if max_workers < 1 {
        return Err("max_workers must be >= 1".into());
    }
    let workers: Vec<u32> = (1..=max_workers).collect();
    let seconds = workers.iter().map(|&w| p.per_iteration_time(w)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    serde_json::to_string(&Curve { workers, seconds, asymptote: p.asymptotic_time() }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct PolicyRun {
    policy: &'static str,
    utility: f64,
    mean_embedded_ratio: f64,
    /// Objective after each slot.
    utility_by_slot: Vec<f64>,
}

pub fn compare_policies_json(cluster: &str, trace: &str, slots: u32, seed: u64) -> Result<String, String> {
    if !(1..=200).contains(&slots) {
        return Err("slots must be in 1..=200".into());
    }
    let env = environment(&format!("gen:{cluster}"), &format!("gen:{trace}"), seed, slots, false).map_err(|e| e.to_string())?;
    let gvne = GvneConfig::default();
    let mut out = Vec::new();
    for name in PolicyChoice::ALL {
        let policy = PolicyChoice::parse(name).map_err(|e| e.to_string())?;
        let run = run_online(&env.jobs, &env.network, policy.build(&gvne, seed).as_mut(), slots);
        let m = RunMetrics::from_run(name, seed, &run, &env.jobs, &env.network);
        let utility_by_slot = (1..=slots).map(|t| objective_at(&run.schedule.accumulators_at(t), &env.jobs)).collect();
        out.push(PolicyRun { policy: policy.name(), utility: m.total_utility, mean_embedded_ratio: m.mean_embedded_ratio(), utility_by_slot });
    }
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Placement {
    job: u32,
    nodes: Vec<usize>,
}

#[derive(Serialize)]
struct SlotComparison {
    seed: u64,
    /// Server GPU capacities by node id.
    servers: Vec<f64>,
    jobs: Vec<u32>,
    gadget_utility: f64,
    oracle_utility: f64,
    gadget: Vec<Placement>,
    oracle: Vec<Placement>,
    accepted: bool,
}

fn placements(alloc: &SlotAllocation) -> Vec<Placement> {
    alloc.embeddings.values().map(|e| Placement { job: e.job, nodes: e.nodes.clone() }).collect()
}

pub fn slot_vs_oracle_json(seed: u64) -> Result<String, String> {
    let cfg = ExperimentConfig::new(Scenario::Approx);
    let env = environment(&cfg.cluster, &cfg.trace, seed, 1, false).map_err(|e| e.to_string())?;
    let first = env.jobs.iter().map(|j| j.arrival).min().ok_or("trace is empty")?;
    let z = BTreeMap::new();
    let pairs: Vec<(&Job, u64)> = active_set(first, &env.jobs, &z).into_iter().map(|j| (j, 0)).collect();
    let instance = GvneInstance::new(first, &env.network, &pairs);
    let gadget = solve_slot(&instance, &cfg.gvne, &mut slot_rng(seed, first));
    let oracle = exact_oracle(&instance, OracleLimits::default()).map_err(|e| e.to_string())?;
    let by_id: BTreeMap<_, _> = env.jobs.iter().map(|j| (j.id, j)).collect();
    let gadget_utility = gadget.allocation.embeddings.iter().map(|(id, e)| incremental_utility(by_id[id], 0, e.size())).sum();
    let out = SlotComparison {
        seed,
        servers: env.network.servers().map(|n| n.capacity.get(0)).collect(),
        jobs: pairs.iter().map(|(j, _)| j.id).collect(),
        gadget_utility,
        oracle_utility: oracle.utility,
        gadget: placements(&gadget.allocation),
        oracle: placements(&oracle.allocation),
        accepted: gadget.diagnostics.accepted,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Per-iteration time `τ(w)` for `w = 1..=max_workers`.
#[wasm_bindgen]
pub fn rar_curve(params: &str, max_workers: u32) -> Result<String, JsError> {
    rar_curve_json(params, max_workers).map_err(|e| JsError::new(&e))
}

/// Runs every policy on a generated cluster and trace. The specs use the
/// CLI's `key=value` syntax without the `gen:` prefix.
#[wasm_bindgen]
pub fn compare_policies(cluster: &str, trace: &str, slots: u32, seed: u32) -> Result<String, JsError> {
    compare_policies_json(cluster, trace, slots, seed as u64).map_err(|e| JsError::new(&e))
}

/// One slot of GADGET against the exact optimum on a small instance.
#[wasm_bindgen]
pub fn slot_vs_oracle(seed: u32) -> Result<String, JsError> {
    slot_vs_oracle_json(seed as u64).map_err(|e| JsError::new(&e))
}
