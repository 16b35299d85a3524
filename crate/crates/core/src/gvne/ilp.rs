use serde::{Deserialize, Serialize};

use crate::lp::{LinearProgram, LpSolution, Relation, VarId, FEAS_TOL};
use crate::model::{EdgeId, JobId, NodeId, SubstrateNetwork};

use super::instance::{GvneInstance, InstanceJob};

/// Variables of one κ-ring request.
#[derive(Debug, Clone, PartialEq)]
pub struct RingVars {
    pub size: u32,
    /// `χ_{i,κ}` in the selection LP; the copy weight in the augmented LP.
    pub weight: VarId,
    /// Server virtual node 0 is pinned to, augmented LP only.
    pub anchor: Option<NodeId>,
    /// `placement[a]`: `(server, ϱ^u_{i,κ,a})`. An anchored node 0 reuses
    /// the copy weight.
    pub placement: Vec<Vec<(NodeId, VarId)>>,
    /// `routing[a][e]`: `θ` for virtual edge `(a, a+1)` on substrate edge
    /// `e`; `None` where the link is narrower than the job's bandwidth.
    pub routing: Vec<Vec<Option<VarId>>>,
}

impl RingVars {
    pub fn placement_var(&self, a: usize, server: NodeId) -> Option<VarId> {
        self.placement[a].iter().find(|(s, _)| *s == server).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobVars {
    /// Position of the job in `GvneInstance::jobs`.
    pub index: usize,
    pub job: JobId,
    /// `ρ_i`
    pub embed: VarId,
    pub rings: Vec<RingVars>,
    /// `h_i^{u,r}` as `(server, resource, var)`.
    pub node_use: Vec<(NodeId, usize, VarId)>,
    /// `o_i^{u,v}`, in units of the link's capacity.
    pub edge_use: Vec<(EdgeId, VarId)>,
}

/// An LP relaxation together with the index maps needed to read it back.
#[derive(Debug, Clone, PartialEq)]
pub struct IlpModel {
    pub lp: LinearProgram,
    pub jobs: Vec<JobVars>,
}

impl IlpModel {
    pub fn count_vars(&self, mut pred: impl FnMut(&str) -> bool) -> usize {
        self.lp.vars().iter().filter(|v| pred(&v.name)).count()
    }
}

fn add_ring(
    lp: &mut LinearProgram,
    ij: &InstanceJob,
    size: u32,
    weight: VarId,
    anchor: Option<NodeId>,
    net: &SubstrateNetwork,
) -> RingVars {
    let id = ij.id();
    let tag = match anchor {
        Some(s) => format!("{id}_{size}@{s}"),
        None => format!("{id}_{size}"),
    };
    let mut placement = Vec::with_capacity(size as usize);
    for a in 0..size as usize {
        if a == 0 {
            if let Some(s) = anchor {
                placement.push(vec![(s, weight)]);
                continue;
            }
        }
        let vars: Vec<(NodeId, VarId)> = ij
            .candidates
            .iter()
            .map(|&s| (s, lp.add_var(format!("varrho[{tag},{a},{s}]"), 0.0, 1.0, 0.0)))
            .collect();
        let mut terms: Vec<_> = vars.iter().map(|&(_, v)| (v, 1.0)).collect();
        terms.push((weight, -1.0));
        lp.add_constraint(format!("place[{tag},{a}]"), terms, Relation::Eq, 0.0);
        placement.push(vars);
    }

    let ring = RingVars { size, weight, anchor, placement, routing: Vec::new() };
    let mut routing = Vec::new();
    if size >= 2 {
        for a in 0..size as usize {
            let b = (a + 1) % size as usize;
            let theta: Vec<Option<VarId>> = net
                .edges()
                .iter()
                .enumerate()
                .map(|(e, edge)| {
                    (edge.bandwidth + 1e-9 >= ij.job.bandwidth)
                        .then(|| lp.add_var(format!("theta[{tag},{a},{e}]"), 0.0, 1.0, 0.0))
                })
                .collect();
            for u in 0..net.nodes().len() {
                let mut terms = Vec::new();
                for &e in net.out_edges(u) {
                    if let Some(v) = theta[e] {
                        terms.push((v, 1.0));
                    }
                }
                for &e in net.in_edges(u) {
                    if let Some(v) = theta[e] {
                        terms.push((v, -1.0));
                    }
                }
                if let Some(v) = ring.placement_var(a, u) {
                    terms.push((v, -1.0));
                }
                if let Some(v) = ring.placement_var(b, u) {
                    terms.push((v, 1.0));
                }
                if !terms.is_empty() {
                    lp.add_constraint(format!("flow[{tag},{a},{u}]"), terms, Relation::Eq, 0.0);
                }
            }
            routing.push(theta);
        }
    }
    RingVars { routing, ..ring }
}

/// Adds `h`/`o` accumulation rows for one job and returns the variables.
fn add_usage(lp: &mut LinearProgram, jv: &mut JobVars, ij: &InstanceJob, net: &SubstrateNetwork) {
    let id = ij.id();
    for &s in &ij.candidates {
        for (r, d) in ij.job.demand.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            let h = lp.add_var(format!("h[{id},{s},{r}]"), 0.0, f64::INFINITY, 0.0);
            let mut terms = vec![(h, 1.0)];
            for ring in &jv.rings {
                for a in 0..ring.size as usize {
                    if let Some(v) = ring.placement_var(a, s) {
                        terms.push((v, -d));
                    }
                }
            }
            lp.add_constraint(format!("hsum[{id},{s},{r}]"), terms, Relation::Eq, 0.0);
            jv.node_use.push((s, r, h));
        }
    }
    for (e, edge) in net.edges().iter().enumerate() {
        let thetas: Vec<VarId> =
            jv.rings.iter().flat_map(|ring| ring.routing.iter().filter_map(move |t| t[e])).collect();
        if thetas.is_empty() {
            continue;
        }
        let o = lp.add_var(format!("o[{id},{e}]"), 0.0, f64::INFINITY, 0.0);
        let share = ij.job.bandwidth / edge.bandwidth;
        let mut terms = vec![(o, 1.0)];
        terms.extend(thetas.into_iter().map(|v| (v, -share)));
        lp.add_constraint(format!("osum[{id},{e}]"), terms, Relation::Eq, 0.0);
        jv.edge_use.push((e, o));
    }
}

fn add_capacity_rows(lp: &mut LinearProgram, jobs: &[JobVars], net: &SubstrateNetwork) {
    for node in net.servers() {
        for r in 0..net.resource_count() {
            let terms: Vec<_> = jobs
                .iter()
                .flat_map(|jv| jv.node_use.iter().filter(|(s, rr, _)| *s == node.id && *rr == r).map(|&(_, _, v)| (v, 1.0)))
                .collect();
            if !terms.is_empty() {
                lp.add_constraint(format!("cap[{},{r}]", node.id), terms, Relation::Le, node.capacity.get(r));
            }
        }
    }
    for e in 0..net.edges().len() {
        let terms: Vec<_> = jobs
            .iter()
            .flat_map(|jv| jv.edge_use.iter().filter(|(ee, _)| *ee == e).map(|&(_, v)| (v, 1.0)))
            .collect();
        if !terms.is_empty() {
            lp.add_constraint(format!("bw[{e}]"), terms, Relation::Le, 1.0);
        }
    }
}

/// The ring-selection relaxation: every candidate ring size of every job,
/// at most one chosen per job, shared node and link capacities.
pub fn build_ilp(instance: &GvneInstance) -> IlpModel {
    let net = instance.network;
    let mut lp = LinearProgram::new();
    let mut jobs = Vec::new();
    for (idx, ij) in instance.jobs.iter().enumerate() {
        let id = ij.id();
        let embed = lp.add_var(format!("rho[{id}]"), 0.0, 1.0, 0.0);
        let mut rings = Vec::new();
        let mut select = vec![(embed, -1.0)];
        for k in ij.ring_sizes() {
            let chi = lp.add_var(format!("chi[{id},{k}]"), 0.0, 1.0, instance.objective_coeff(idx, k));
            select.push((chi, 1.0));
            rings.push(add_ring(&mut lp, ij, k, chi, None, net));
        }
        lp.add_constraint(format!("one_ring[{id}]"), select, Relation::Eq, 0.0);
        let mut jv = JobVars { index: idx, job: id, embed, rings, node_use: Vec::new(), edge_use: Vec::new() };
        add_usage(&mut lp, &mut jv, ij, net);
        jobs.push(jv);
    }
    add_capacity_rows(&mut lp, &jobs, net);
    IlpModel { lp, jobs }
}

/// A job's ring size fixed by the selection step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingChoice {
    pub index: usize,
    pub job: JobId,
    pub size: u32,
    /// `ρ̄_i` in the selection LP.
    pub mass: f64,
    /// Servers hosting some fractional worker of the chosen size.
    pub support: Vec<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RingSelection {
    pub chosen: Vec<RingChoice>,
    pub rejected: Vec<JobId>,
}

/// `argmax_κ π_κ χ̄_κ` over `χ̄_κ > 0`; ties go to the smaller κ.
pub fn pick_ring_size(chi: &[f64], pi: &[f64]) -> Option<u32> {
    let mut best: Option<(u32, f64)> = None;
    for (k, (&c, &p)) in chi.iter().zip(pi).enumerate() {
        if c <= FEAS_TOL {
            continue;
        }
        let score = p * c;
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((k as u32 + 1, score));
        }
    }
    best.map(|(k, _)| k)
}

pub fn select_ring_sizes(model: &IlpModel, sol: &LpSolution) -> RingSelection {
    let mut out = RingSelection::default();
    for jv in &model.jobs {
        let mass = sol.value(jv.embed);
        let chi: Vec<f64> = jv.rings.iter().map(|r| sol.value(r.weight)).collect();
        let pi: Vec<f64> = jv.rings.iter().map(|r| model.lp.objective_coeff(r.weight)).collect();
        match pick_ring_size(&chi, &pi).filter(|_| mass > FEAS_TOL) {
            Some(size) => {
                let ring = &jv.rings[size as usize - 1];
                let mut support: Vec<NodeId> = ring
                    .placement
                    .iter()
                    .flatten()
                    .filter(|(_, v)| sol.value(*v) > FEAS_TOL)
                    .map(|&(s, _)| s)
                    .collect();
                support.sort_unstable();
                support.dedup();
                out.chosen.push(RingChoice { index: jv.index, job: jv.job, size, mass, support });
            }
            None => out.rejected.push(jv.job),
        }
    }
    out
}

/// The augmented LP for fixed ring sizes: one copy of each job's ring per
/// anchor server for virtual node 0, copy weights summing to `ρ_i`.
/// `anchors(choice)` lists the anchor servers to build copies for.
pub fn build_augmented_lp(
    instance: &GvneInstance,
    choices: &[RingChoice],
    mut anchors: impl FnMut(&RingChoice) -> Vec<NodeId>,
) -> IlpModel {
    let net = instance.network;
    let mut lp = LinearProgram::new();
    let mut jobs = Vec::new();
    for choice in choices {
        let ij = &instance.jobs[choice.index];
        let id = ij.id();
        let embed = lp.add_var(format!("rho[{id}]"), 0.0, 1.0, instance.objective_coeff(choice.index, choice.size));
        let mut rings = Vec::new();
        let mut bind = vec![(embed, -1.0)];
        for s in anchors(choice) {
            let w = lp.add_var(format!("copy[{id},{s}]"), 0.0, 1.0, 0.0);
            bind.push((w, 1.0));
            rings.push(add_ring(&mut lp, ij, choice.size, w, Some(s), net));
        }
        lp.add_constraint(format!("copies[{id}]"), bind, Relation::Eq, 0.0);
        let mut jv =
            JobVars { index: choice.index, job: id, embed, rings, node_use: Vec::new(), edge_use: Vec::new() };
        add_usage(&mut lp, &mut jv, ij, net);
        jobs.push(jv);
    }
    add_capacity_rows(&mut lp, &jobs, net);
    IlpModel { lp, jobs }
}

/// Every candidate server of the job.
pub fn all_anchors<'a>(instance: &'a GvneInstance<'a>) -> impl FnMut(&RingChoice) -> Vec<NodeId> + 'a {
    |c| instance.jobs[c.index].candidates.clone()
}

/// Servers with fractional support in the selection LP, or every candidate
/// when the support is empty.
pub fn support_anchors<'a>(instance: &'a GvneInstance<'a>) -> impl FnMut(&RingChoice) -> Vec<NodeId> + 'a {
    |c| if c.support.is_empty() { instance.jobs[c.index].candidates.clone() } else { c.support.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gvne::testutil::*;
    use crate::lp::solve;

    #[test]
    fn single_server_single_size() {
        let net = servers_net(&[4.0], 1e9);
        let mut j = gpu_job(1, 1);
        j.max_workers = 1;
        let inst = GvneInstance::new(1, &net, &[(&j, 0)]);
        let m = build_ilp(&inst);
        assert_eq!(m.count_vars(|n| n.starts_with("varrho")), 1);
        assert_eq!(m.count_vars(|n| n.starts_with("theta")), 0);
        assert_eq!(m.count_vars(|n| n.starts_with("rho[")), 1);
        assert_eq!(m.count_vars(|n| n.starts_with("chi")), 1);
        assert!(m.lp.constraints().iter().all(|c| !c.name.starts_with("flow") && !c.name.starts_with("bw")));
    }

    #[test]
    fn variable_counts_two_servers() {
        let net = pair_net(1e9);
        let mut j = gpu_job(1, 2);
        j.max_workers = 2;
        let inst = GvneInstance::new(1, &net, &[(&j, 0)]);
        assert_eq!(inst.jobs[0].upper_bound, 2);
        let m = build_ilp(&inst);
        assert_eq!(m.count_vars(|n| n.starts_with("varrho")), 6);
        assert_eq!(m.count_vars(|n| n.starts_with("theta")), 4);
    }

    #[test]
    fn oversized_demand_gives_zero_embedding() {
        let net = servers_net(&[2.0, 2.0], 1e9);
        let mut j = gpu_job(1, 2);
        j.demand.0[0] = 3.0;
        j.budget.0[0] = 300.0;
        // bypass the capacity share so the job reaches the LP
        let inst = GvneInstance {
            slot: 1,
            network: &net,
            jobs: vec![InstanceJob {
                candidates: Vec::new(),
                job: j.clone(),
                z_prev: 0,
                upper_bound: 2,
                increments: vec![1.0, 2.0],
            }],
            excluded: Vec::new(),
            idle_weight: 0.0,
        };
        let m = build_ilp(&inst);
        let sol = solve(&m.lp);
        assert!(sol.is_optimal());
        assert!(sol.value(m.jobs[0].embed).abs() < 1e-9);
        assert_eq!(select_ring_sizes(&m, &sol).rejected, vec![1]);
    }

    #[test]
    fn ring_size_rule() {
        assert_eq!(pick_ring_size(&[0.2, 0.5, 0.3], &[1.0, 2.0, 3.0]), Some(2));
        assert_eq!(pick_ring_size(&[1.0, 0.0, 0.0], &[1.0, 2.0, 3.0]), Some(1));
        assert_eq!(pick_ring_size(&[0.5, 0.25], &[1.0, 2.0]), Some(1));
        assert_eq!(pick_ring_size(&[0.0, 0.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn augmented_copy_per_server() {
        let net = servers_net(&[4.0, 4.0, 4.0], 1e9);
        let j = gpu_job(1, 2);
        let inst = GvneInstance::new(1, &net, &[(&j, 0)]);
        let choice = RingChoice { index: 0, job: 1, size: 1, mass: 1.0, support: vec![] };
        let m = build_augmented_lp(&inst, std::slice::from_ref(&choice), all_anchors(&inst));
        assert_eq!(m.jobs[0].rings.len(), 3);
        assert_eq!(m.count_vars(|n| n.starts_with("varrho")), 0);
        let m = build_augmented_lp(&inst, &[RingChoice { size: 2, ..choice }], all_anchors(&inst));
        assert_eq!(m.jobs[0].rings.len(), 3);
        let sol = solve(&m.lp);
        assert!(sol.is_optimal());
        assert!((sol.value(m.jobs[0].embed) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn narrow_links_carry_no_flow() {
        let net = pair_net(1e6);
        let j = gpu_job(1, 2);
        let inst = GvneInstance::new(1, &net, &[(&j, 0)]);
        let m = build_ilp(&inst);
        assert_eq!(m.count_vars(|n| n.starts_with("theta")), 0);
    }
}
