//! FIFO, DRF and LAS baselines, all placing rings with a greedy packer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{CapacitySlack, EdgeId, Embedding, Job, JobId, NodeId, ResourceVector, SlotAllocation, SubstrateNetwork};
use crate::scheduler::{PolicyOutput, SlotContext, SlotPolicy};

/// Capacity left on nodes and links within one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub node: Vec<ResourceVector>,
    pub edge: Vec<f64>,
}

impl Residual {
    pub fn new(net: &SubstrateNetwork) -> Self {
        Residual {
            node: net.nodes().iter().map(|n| n.capacity.clone()).collect(),
            edge: net.edges().iter().map(|e| e.bandwidth).collect(),
        }
    }

    fn apply(&mut self, emb: &Embedding, job: &Job, sign: f64) {
        for &s in &emb.nodes {
            self.node[s].add_scaled(&job.demand, sign);
        }
        for &e in emb.paths.iter().flatten() {
            self.edge[e] += sign * job.bandwidth;
        }
    }

    pub fn commit(&mut self, emb: &Embedding, job: &Job) {
        self.apply(emb, job, -1.0);
    }

    pub fn release(&mut self, emb: &Embedding, job: &Job) {
        self.apply(emb, job, 1.0);
    }
}

/// Packs `size` workers onto servers in descending residual-GPU order, then
/// closes a ring through the hosts ordered by rack and id, routing each hop
/// over links with at least the job's bandwidth left. `None` when workers
/// or a hop do not fit. `residual` is not modified.
pub fn greedy_place(job: &Job, size: u32, net: &SubstrateNetwork, residual: &Residual) -> Option<Embedding> {
    if size == 0 {
        return None;
    }
    let mut servers: Vec<NodeId> = net.server_ids();
    servers.sort_by(|&a, &b| residual.node[b].get(0).total_cmp(&residual.node[a].get(0)).then(a.cmp(&b)));
    let mut left = size;
    let mut hosts: Vec<(NodeId, u32)> = Vec::new();
    for s in servers {
        if left == 0 {
            break;
        }
        let fit = residual.node[s].copies_of(&job.demand).unwrap_or(0).min(left);
        if fit > 0 {
            hosts.push((s, fit));
            left -= fit;
        }
    }
    if left > 0 {
        return None;
    }
    hosts.sort_by_key(|&(s, _)| (net.node(s).rack, s));
    let nodes: Vec<NodeId> = hosts.iter().flat_map(|&(s, c)| std::iter::repeat_n(s, c as usize)).collect();
    let mut paths: Vec<Vec<EdgeId>> = Vec::new();
    if size >= 2 {
        let mut bw = residual.edge.clone();
        for a in 0..nodes.len() {
            let (u, v) = (nodes[a], nodes[(a + 1) % nodes.len()]);
            let path = net.shortest_path(u, v, |e| bw[e] + 1e-6 >= job.bandwidth)?;
            for &e in &path {
                bw[e] -= job.bandwidth;
            }
            paths.push(path);
        }
    }
    Some(Embedding { job: job.id, nodes, paths })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselinePolicy {
    Fifo { fixed_workers: u32 },
    Drf,
    Las { fixed_workers: u32 },
}

impl BaselinePolicy {
    pub const DEFAULT_WORKERS: u32 = 4;

    pub fn fifo() -> Self {
        BaselinePolicy::Fifo { fixed_workers: Self::DEFAULT_WORKERS }
    }

    pub fn las() -> Self {
        BaselinePolicy::Las { fixed_workers: Self::DEFAULT_WORKERS }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            BaselinePolicy::Fifo { fixed_workers: w } | BaselinePolicy::Las { fixed_workers: w } if !(1..=10).contains(&w) => {
                Err(format!("fixed workers {w} outside [1, 10]"))
            }
            _ => Ok(()),
        }
    }
}

/// Workers a fixed-size policy asks for: the fixed count within the cap
/// and the remaining budget.
fn request(job: &Job, fixed: u32, z: u64) -> u32 {
    fixed.min(job.max_workers).min(job.headroom(z))
}

/// First-come first-served: the earliest unsatisfied job blocks all later
/// ones for the slot.
pub fn schedule_slot_fifo(ctx: &SlotContext, fixed_workers: u32) -> SlotAllocation {
    let mut order = ctx.active.clone();
    order.sort_by_key(|j| (j.arrival, j.id));
    let mut residual = Residual::new(ctx.network);
    let mut alloc = SlotAllocation::empty(ctx.slot);
    for job in order {
        let want = request(job, fixed_workers, ctx.z(job.id));
        match greedy_place(job, want, ctx.network, &residual) {
            Some(emb) => {
                residual.commit(&emb, job);
                alloc.insert(emb);
            }
            None => break,
        }
    }
    alloc
}

/// GPU-slots a job has consumed: accumulated worker-slots times its
/// per-worker GPU demand.
pub fn attained_service(job: &Job, z: u64) -> f64 {
    z as f64 * job.demand.get(0)
}

/// Least attained service: ascending [`attained_service`], earlier arrival
/// first on ties; jobs that do not fit are skipped.
pub fn schedule_slot_las(ctx: &SlotContext, fixed_workers: u32) -> SlotAllocation {
    let mut order = ctx.active.clone();
    order.sort_by(|a, b| {
        attained_service(a, ctx.z(a.id))
            .total_cmp(&attained_service(b, ctx.z(b.id)))
            .then((a.arrival, a.id).cmp(&(b.arrival, b.id)))
    });
    let mut residual = Residual::new(ctx.network);
    let mut alloc = SlotAllocation::empty(ctx.slot);
    for job in order {
        let want = request(job, fixed_workers, ctx.z(job.id));
        if let Some(emb) = greedy_place(job, want, ctx.network, &residual) {
            residual.commit(&emb, job);
            alloc.insert(emb);
        }
    }
    alloc
}

/// `max_r allocated_r / cluster_r` over resource types the cluster has.
pub fn dominant_share(job: &Job, workers: u32, cluster: &ResourceVector) -> f64 {
    job.demand
        .iter()
        .zip(cluster.iter())
        .filter(|(_, c)| *c > 0.0)
        .map(|(d, c)| d * workers as f64 / c)
        .fold(0.0, f64::max)
}

/// One DRF grant: the job receiving the worker and its dominant share
/// before the grant.
#[derive(Debug, Clone, PartialEq)]
pub struct DrfGrant {
    pub job: JobId,
    pub share: f64,
}

/// Dominant resource fairness: one worker at a time to the job with the
/// smallest dominant share, re-placing its whole ring each time. A job
/// whose next ring does not fit stops receiving grants.
pub fn schedule_slot_drf(ctx: &SlotContext) -> (SlotAllocation, Vec<DrfGrant>) {
    let cluster = ctx.network.total_capacity();
    let mut residual = Residual::new(ctx.network);
    let mut current: BTreeMap<JobId, Embedding> = BTreeMap::new();
    let mut open: Vec<&Job> = ctx.active.clone();
    open.sort_by_key(|j| (j.arrival, j.id));
    let mut grants = Vec::new();
    loop {
        open.retain(|j| {
            let have = current.get(&j.id).map_or(0, |e| e.size());
            have < j.max_workers.min(j.headroom(ctx.z(j.id)))
        });
        let Some((pos, share)) = open
            .iter()
            .enumerate()
            .map(|(p, j)| (p, dominant_share(j, current.get(&j.id).map_or(0, |e| e.size()), &cluster)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        else {
            break;
        };
        let job = open[pos];
        let old = current.remove(&job.id);
        if let Some(e) = &old {
            residual.release(e, job);
        }
        let size = old.as_ref().map_or(0, |e| e.size()) + 1;
        match greedy_place(job, size, ctx.network, &residual) {
            Some(emb) => {
                residual.commit(&emb, job);
                current.insert(job.id, emb);
                grants.push(DrfGrant { job: job.id, share });
            }
            None => {
                if let Some(e) = old {
                    residual.commit(&e, job);
                    current.insert(job.id, e);
                }
                open.remove(pos);
            }
        }
    }
    let mut alloc = SlotAllocation::empty(ctx.slot);
    for emb in current.into_values() {
        alloc.insert(emb);
    }
    (alloc, grants)
}

#[derive(Debug, Clone)]
pub struct Baseline {
    pub policy: BaselinePolicy,
}

impl SlotPolicy for Baseline {
    fn name(&self) -> &str {
        match self.policy {
            BaselinePolicy::Fifo { .. } => "fifo",
            BaselinePolicy::Drf => "drf",
            BaselinePolicy::Las { .. } => "las",
        }
    }

    fn allocate(&mut self, ctx: &SlotContext) -> PolicyOutput {
        let allocation = match self.policy {
            BaselinePolicy::Fifo { fixed_workers } => schedule_slot_fifo(ctx, fixed_workers),
            BaselinePolicy::Drf => schedule_slot_drf(ctx).0,
            BaselinePolicy::Las { fixed_workers } => schedule_slot_las(ctx, fixed_workers),
        };
        PolicyOutput { allocation, slack: CapacitySlack::strict(ctx.network.resource_count()), diagnostics: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_ring, Edge, Node, NodeKind};
    use crate::rartime::UtilitySpec;

    fn net(gpus: &[f64], bw: f64) -> SubstrateNetwork {
        let mut nodes: Vec<Node> = gpus
            .iter()
            .enumerate()
            .map(|(i, &g)| Node { id: i, kind: NodeKind::Server, capacity: ResourceVector(vec![g, 100.0]), rack: Some(0) })
            .collect();
        let sw = gpus.len();
        nodes.push(Node { id: sw, kind: NodeKind::Switch, capacity: ResourceVector(vec![0.0, 0.0]), rack: None });
        let edges = (0..sw)
            .flat_map(|i| [Edge { from: i, to: sw, bandwidth: bw }, Edge { from: sw, to: i, bandwidth: bw }])
            .collect();
        SubstrateNetwork::new(vec!["gpu".into(), "mem".into()], nodes, edges).unwrap()
    }

    fn job(id: JobId, arrival: u32) -> Job {
        Job {
            id,
            arrival,
            max_workers: 10,
            demand: ResourceVector(vec![1.0, 4.0]),
            budget: ResourceVector(vec![100.0, 400.0]),
            bandwidth: 1e9,
            efficiency: 1.0,
            utility: UtilitySpec::Sqrt { c: 1.0 },
            rar: None,
        }
    }

    #[test]
    fn colocates_when_one_server_fits() {
        let n = net(&[4.0, 1.0], 1e10);
        let emb = greedy_place(&job(1, 1), 3, &n, &Residual::new(&n)).unwrap();
        assert_eq!(emb.nodes, vec![0, 0, 0]);
        assert!(validate_ring(&emb, &n));
    }

    #[test]
    fn spreads_over_one_gpu_servers() {
        let n = net(&[1.0, 1.0, 1.0], 1e10);
        let emb = greedy_place(&job(1, 1), 3, &n, &Residual::new(&n)).unwrap();
        assert_eq!(emb.nodes, vec![0, 1, 2]);
        assert!(validate_ring(&emb, &n));
    }

    #[test]
    fn rejects_without_bandwidth() {
        let n = net(&[1.0, 1.0], 1e8);
        assert!(greedy_place(&job(1, 1), 2, &n, &Residual::new(&n)).is_none());
    }

    #[test]
    fn drf_share_example() {
        let j = Job { demand: ResourceVector(vec![1.0, 4.0]), ..job(1, 1) };
        assert_eq!(dominant_share(&j, 1, &ResourceVector(vec![10.0, 100.0])), 0.1);
    }

    #[test]
    fn fifo_single_job_matches_greedy() {
        let n = net(&[4.0, 2.0], 1e10);
        let jobs = [job(1, 1)];
        let z = BTreeMap::new();
        let ctx = SlotContext { slot: 1, network: &n, active: jobs.iter().collect(), z_prev: &z };
        let a = schedule_slot_fifo(&ctx, 4);
        assert_eq!(a.embeddings[&1], greedy_place(&jobs[0], 4, &n, &Residual::new(&n)).unwrap());
    }

    #[test]
    fn fifo_blocks_later_jobs() {
        let n = net(&[4.0, 2.0], 1e10);
        let jobs = [job(1, 1), job(2, 2), job(3, 3)];
        let z = BTreeMap::new();
        let ctx = SlotContext { slot: 3, network: &n, active: jobs.iter().collect(), z_prev: &z };
        let a = schedule_slot_fifo(&ctx, 4);
        assert_eq!(a.workers(1), 4);
        assert_eq!(a.workers(2), 0);
        assert_eq!(a.workers(3), 0);
    }

    #[test]
    fn las_prefers_least_served() {
        let n = net(&[4.0], 1e10);
        let jobs = [job(1, 1), job(2, 2)];
        let z = BTreeMap::from([(1, 10), (2, 3)]);
        let ctx = SlotContext { slot: 3, network: &n, active: jobs.iter().collect(), z_prev: &z };
        let a = schedule_slot_las(&ctx, 4);
        assert_eq!(a.workers(2), 4);
        assert_eq!(a.workers(1), 0);
        let z = BTreeMap::from([(1, 3), (2, 3)]);
        let ctx = SlotContext { z_prev: &z, ..ctx };
        assert_eq!(schedule_slot_las(&ctx, 4).workers(1), 4);
    }

    #[test]
    fn drf_grants_go_to_minimum_share() {
        let n = net(&[4.0, 4.0], 1e10);
        let mut big = job(2, 1);
        big.demand = ResourceVector(vec![2.0, 20.0]);
        big.budget = ResourceVector(vec![200.0, 2000.0]);
        let jobs = [job(1, 1), big];
        let z = BTreeMap::new();
        let ctx = SlotContext { slot: 1, network: &n, active: jobs.iter().collect(), z_prev: &z };
        let (a, grants) = schedule_slot_drf(&ctx);
        let cluster = n.total_capacity();
        let mut have: BTreeMap<JobId, u32> = BTreeMap::new();
        for g in &grants {
            let min = jobs
                .iter()
                .map(|j| dominant_share(j, *have.get(&j.id).unwrap_or(&0), &cluster))
                .fold(f64::INFINITY, f64::min);
            assert!(g.share <= min + 1e-12);
            *have.entry(g.job).or_default() += 1;
        }
        assert!(a.workers(1) > a.workers(2));
        let jobs_map = jobs.iter().map(|j| (j.id, j)).collect();
        for load in a.node_loads(&jobs_map, &n) {
            assert!(load.get(0) <= 4.0 && load.get(1) <= 100.0);
        }
    }
}
