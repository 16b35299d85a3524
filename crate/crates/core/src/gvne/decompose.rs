use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::lp::{LpSolution, VarId, FEAS_TOL};
use crate::model::{validate_ring, EdgeId, Embedding, JobId, NodeId, SubstrateNetwork};

use super::ilp::{IlpModel, RingVars};
use super::instance::GvneInstance;

/// Residual values at or below this are treated as exhausted.
const RESIDUAL_TOL: f64 = 1e-9;

/// Mapping-selection tuples `(φ, ω)` recovered for one job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingSelection {
    pub job: JobId,
    pub index: usize,
    pub size: u32,
    /// `ρ̄_i` of the augmented LP.
    pub mass: f64,
    pub tuples: Vec<(f64, Embedding)>,
    /// Copy mass left behind when no positive path could be found.
    pub stalled: f64,
    /// Extractions whose host sequence was rebuilt as contiguous blocks.
    pub repaired: u32,
}

impl MappingSelection {
    pub fn total(&self) -> f64 {
        self.tuples.iter().map(|(p, _)| p).sum()
    }
}

/// Splits each job's augmented-LP flow into integral ring embeddings with
/// probabilities, copy by copy.
pub fn decompose(model: &IlpModel, sol: &LpSolution, instance: &GvneInstance) -> Vec<MappingSelection> {
    let net = instance.network;
    let mut residual = sol.values.clone();
    let mut out = Vec::new();
    for jv in &model.jobs {
        let ij = &instance.jobs[jv.index];
        let mut sel = MappingSelection {
            job: jv.job,
            index: jv.index,
            size: jv.rings.first().map_or(0, |r| r.size),
            mass: sol.value(jv.embed),
            tuples: Vec::new(),
            stalled: 0.0,
            repaired: 0,
        };
        for ring in &jv.rings {
            let positive = count_positive(ring, &residual) + 1;
            let mut stuck = false;
            for _ in 0..positive {
                let weight = residual[ring.weight.0];
                if weight <= RESIDUAL_TOL {
                    break;
                }
                let Some(walk) = walk_copy(ring, &residual, net) else {
                    sel.stalled += weight;
                    stuck = true;
                    break;
                };
                let phi = walk.vars.iter().map(|v| residual[v.0]).fold(f64::INFINITY, f64::min);
                for v in &walk.vars {
                    residual[v.0] -= phi;
                }
                let mut emb = Embedding { job: jv.job, nodes: walk.hosts, paths: walk.paths };
                if walk.repair || !validate_ring(&emb, net) {
                    match contiguous_ring(jv.job, &emb.nodes, ij.job.bandwidth, net) {
                        Some(fixed) => emb = fixed,
                        None => {
                            sel.stalled += phi;
                            continue;
                        }
                    }
                    sel.repaired += 1;
                }
                match sel.tuples.iter_mut().find(|(_, e)| *e == emb) {
                    Some((p, _)) => *p += phi,
                    None => sel.tuples.push((phi, emb)),
                }
            }
            if !stuck && residual[ring.weight.0] > RESIDUAL_TOL {
                sel.stalled += residual[ring.weight.0];
            }
        }
        if sel.stalled > FEAS_TOL {
            log::debug!("job {}: decomposition stalled with mass {:.3e}", sel.job, sel.stalled);
        }
        out.push(sel);
    }
    out
}

fn count_positive(ring: &RingVars, residual: &[f64]) -> usize {
    let place = ring.placement.iter().flatten().filter(|(_, v)| residual[v.0] > RESIDUAL_TOL).count();
    let route = ring.routing.iter().flatten().flatten().filter(|v| residual[v.0] > RESIDUAL_TOL).count();
    place + route
}

struct Walk {
    hosts: Vec<NodeId>,
    paths: Vec<Vec<EdgeId>>,
    vars: Vec<VarId>,
    repair: bool,
}

/// One extraction: follow positive placement and routing residuals from
/// the anchor around the ring and back.
fn walk_copy(ring: &RingVars, residual: &[f64], net: &SubstrateNetwork) -> Option<Walk> {
    let size = ring.size as usize;
    let anchor = ring.anchor?;
    let mut walk = Walk { hosts: vec![anchor], paths: Vec::new(), vars: vec![ring.weight], repair: false };
    let mut used = BTreeSet::from([anchor]);
    let mut cur = anchor;
    for a in 0..size {
        let b = (a + 1) % size;
        if size < 2 {
            break;
        }
        let routing = &ring.routing[a];
        let usable = |e: EdgeId| routing[e].is_some_and(|v| residual[v.0] > RESIDUAL_TOL);
        let next = if b == 0 {
            anchor
        } else {
            let reach = reachable(net, cur, usable);
            let live: Vec<(NodeId, VarId)> = ring.placement[b]
                .iter()
                .copied()
                .filter(|&(s, v)| residual[v.0] > RESIDUAL_TOL && reach.contains(&s))
                .collect();
            let contiguous: Vec<_> = live.iter().copied().filter(|&(s, _)| s == cur || !used.contains(&s)).collect();
            let pool = if contiguous.is_empty() {
                walk.repair = true;
                &live
            } else {
                &contiguous
            };
            let &(s, v) = pool.iter().max_by(|x, y| residual[x.1 .0].total_cmp(&residual[y.1 .0]).then(y.0.cmp(&x.0)))?;
            walk.vars.push(v);
            s
        };
        let path = widest_path(net, cur, next, |e| routing[e].map_or(0.0, |v| residual[v.0]))?;
        walk.vars.extend(path.iter().map(|&e| routing[e].expect("routed edge has a variable")));
        walk.paths.push(path);
        if b != 0 {
            walk.hosts.push(next);
            used.insert(next);
        }
        cur = next;
    }
    Some(walk)
}

fn reachable(net: &SubstrateNetwork, from: NodeId, usable: impl Fn(EdgeId) -> bool) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::from([from]);
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        for &e in net.out_edges(u) {
            let v = net.edge(e).to;
            if usable(e) && seen.insert(v) {
                stack.push(v);
            }
        }
    }
    seen
}

/// Path maximising the smallest residual along it, then fewest hops.
/// Edges with residual at or below tolerance are unusable.
fn widest_path(net: &SubstrateNetwork, from: NodeId, to: NodeId, width: impl Fn(EdgeId) -> f64) -> Option<Vec<EdgeId>> {
    if from == to {
        return Some(Vec::new());
    }
    let n = net.nodes().len();
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n];
    let mut parent: Vec<Option<EdgeId>> = vec![None; n];
    let mut done = vec![false; n];
    best[from] = Some((f64::INFINITY, 0));
    loop {
        let u = (0..n)
            .filter(|&u| !done[u] && best[u].is_some())
            .max_by(|&x, &y| {
                let (wx, hx) = best[x].unwrap();
                let (wy, hy) = best[y].unwrap();
                wx.total_cmp(&wy).then(hy.cmp(&hx)).then(y.cmp(&x))
            })?;
        if u == to {
            break;
        }
        done[u] = true;
        let (wu, hu) = best[u].unwrap();
        for &e in net.out_edges(u) {
            let w = width(e);
            if w <= RESIDUAL_TOL {
                continue;
            }
            let v = net.edge(e).to;
            let cand = (wu.min(w), hu + 1);
            let better = match best[v] {
                None => true,
                Some((bw, bh)) => cand.0 > bw || (cand.0 == bw && cand.1 < bh),
            };
            if !done[v] && better {
                best[v] = Some(cand);
                parent[v] = Some(e);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = to;
    while cur != from {
        let e = parent[cur]?;
        path.push(e);
        cur = net.edge(e).from;
    }
    path.reverse();
    Some(path)
}

/// Rebuilds a host sequence as contiguous per-server blocks in order of
/// first appearance, routed along fewest-hop paths wide enough for the job.
pub fn contiguous_ring(job: JobId, hosts: &[NodeId], bandwidth: f64, net: &SubstrateNetwork) -> Option<Embedding> {
    let mut order: Vec<(NodeId, usize)> = Vec::new();
    for &h in hosts {
        match order.iter_mut().find(|(s, _)| *s == h) {
            Some((_, c)) => *c += 1,
            None => order.push((h, 1)),
        }
    }
    let nodes: Vec<NodeId> = order.iter().flat_map(|&(s, c)| std::iter::repeat_n(s, c)).collect();
    let size = nodes.len();
    let mut paths = Vec::new();
    if size >= 2 {
        for a in 0..size {
            let (u, v) = (nodes[a], nodes[(a + 1) % size]);
            paths.push(net.shortest_path(u, v, |e| net.edge(e).bandwidth + 1e-9 >= bandwidth)?);
        }
    }
    let emb = Embedding { job, nodes, paths };
    validate_ring(&emb, net).then_some(emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gvne::ilp::{all_anchors, build_augmented_lp, RingChoice};
    use crate::gvne::testutil::*;
    use crate::lp::{solve, LpStatus};

    #[test]
    fn integral_solution_gives_one_tuple() {
        let net = servers_net(&[4.0], 1e9);
        let j = gpu_job(1, 3);
        let inst = GvneInstance::new(1, &net, &[(&j, 0)]);
        let choice = RingChoice { index: 0, job: 1, size: 3, mass: 1.0, support: vec![] };
        let m = build_augmented_lp(&inst, &[choice], all_anchors(&inst));
        let sol = solve(&m.lp);
        let sel = decompose(&m, &sol, &inst);
        assert_eq!(sel[0].tuples.len(), 1);
        assert!((sel[0].tuples[0].0 - 1.0).abs() < 1e-9);
        assert_eq!(sel[0].tuples[0].1, Embedding::colocated(1, 0, 3));
    }

    #[test]
    fn half_half_split() {
        let net = servers_net(&[1.0, 1.0], 1e9);
        let j = gpu_job(1, 1);
        let inst = GvneInstance::new(1, &net, &[(&j, 0)]);
        let choice = RingChoice { index: 0, job: 1, size: 1, mass: 1.0, support: vec![] };
        let m = build_augmented_lp(&inst, &[choice], all_anchors(&inst));
        let w: Vec<_> = m.jobs[0].rings.iter().map(|r| r.weight).collect();
        let mut values = vec![0.0; m.lp.num_vars()];
        values[m.jobs[0].embed.0] = 1.0;
        values[w[0].0] = 0.5;
        values[w[1].0] = 0.5;
        for &(_, _, h) in &m.jobs[0].node_use {
            let name = &m.lp.vars()[h.0].name;
            values[h.0] = if name.ends_with(",0]") { 0.5 } else { 4.0 };
        }
        assert!(m.lp.max_infeasibility(&values) < 1e-12);
        let sol = LpSolution { status: LpStatus::Optimal, values, objective: 0.0 };
        let sel = decompose(&m, &sol, &inst);
        let probs: Vec<f64> = sel[0].tuples.iter().map(|t| t.0).collect();
        assert_eq!(probs, vec![0.5, 0.5]);
    }

    #[test]
    fn zero_mass_gives_nothing() {
        let net = servers_net(&[4.0], 1e9);
        let j = gpu_job(1, 2);
        let inst = GvneInstance::new(1, &net, &[(&j, 0)]);
        let choice = RingChoice { index: 0, job: 1, size: 2, mass: 0.0, support: vec![] };
        let m = build_augmented_lp(&inst, &[choice], all_anchors(&inst));
        let sol = LpSolution { status: LpStatus::Optimal, values: vec![0.0; m.lp.num_vars()], objective: 0.0 };
        let sel = decompose(&m, &sol, &inst);
        assert!(sel[0].tuples.is_empty());
        assert_eq!(sel[0].stalled, 0.0);
    }

    #[test]
    fn spread_ring_over_servers() {
        let net = servers_net(&[1.0, 1.0, 1.0], 1e9);
        let j = gpu_job(1, 3);
        let inst = GvneInstance::new(1, &net, &[(&j, 0)]);
        let choice = RingChoice { index: 0, job: 1, size: 3, mass: 1.0, support: vec![] };
        let m = build_augmented_lp(&inst, &[choice], all_anchors(&inst));
        let sol = solve(&m.lp);
        assert!((sol.objective - 3f64.sqrt()).abs() < 1e-6);
        let sel = decompose(&m, &sol, &inst);
        assert!((sel[0].total() - 1.0).abs() < 1e-6);
        for (_, emb) in &sel[0].tuples {
            assert!(validate_ring(emb, &net));
            assert_eq!(emb.size(), 3);
        }
    }

    #[test]
    fn contiguous_rebuild() {
        let net = servers_net(&[4.0, 4.0], 1e9);
        let emb = contiguous_ring(7, &[0, 1, 0, 1], 1e8, &net).unwrap();
        assert_eq!(emb.nodes, vec![0, 0, 1, 1]);
        assert!(validate_ring(&emb, &net));
    }
}
