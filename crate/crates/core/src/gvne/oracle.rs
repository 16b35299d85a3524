use serde::{Deserialize, Serialize};

use crate::model::{EdgeId, Embedding, NodeId, SlotAllocation, SubstrateNetwork};

use super::instance::{GvneInstance, InstanceJob};
use super::GvneError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_jobs: usize,
    pub max_servers: usize,
    pub max_ring: u32,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_jobs: 3, max_servers: 5, max_ring: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub utility: f64,
    pub allocation: SlotAllocation,
    /// Complete assignments examined.
    pub explored: u64,
}

struct Placement {
    utility: f64,
    emb: Embedding,
    /// `(server, workers)`
    hosts: Vec<(NodeId, u32)>,
    edges: Vec<EdgeId>,
}

/// Exhaustive search over ring sizes, cyclic server sequences with worker
/// counts, and fewest-hop routes, under strict node and link capacities.
pub fn exact_oracle(instance: &GvneInstance, limits: OracleLimits) -> Result<OracleResult, GvneError> {
    let net = instance.network;
    let servers = net.servers().count();
    if instance.jobs.len() > limits.max_jobs {
        return Err(GvneError::OracleLimit(format!("{} jobs > {}", instance.jobs.len(), limits.max_jobs)));
    }
    if servers > limits.max_servers {
        return Err(GvneError::OracleLimit(format!("{servers} servers > {}", limits.max_servers)));
    }
    if instance.max_ring() > limits.max_ring {
        return Err(GvneError::OracleLimit(format!("ring size {} > {}", instance.max_ring(), limits.max_ring)));
    }

    let options: Vec<Vec<Placement>> = instance.jobs.iter().map(|ij| job_options(ij, net)).collect();
    let tails: Vec<f64> = {
        let mut t = vec![0.0; options.len() + 1];
        for i in (0..options.len()).rev() {
            let best = options[i].iter().map(|o| o.utility).fold(0.0, f64::max);
            t[i] = t[i + 1] + best;
        }
        t
    };
    let mut search = Search {
        instance,
        options: &options,
        tails: &tails,
        node_left: net.nodes().iter().map(|n| n.capacity.0.clone()).collect(),
        edge_left: net.edges().iter().map(|e| e.bandwidth).collect(),
        current: vec![None; options.len()],
        best: (0.0, vec![None; options.len()]),
        explored: 0,
    };
    search.dfs(0, 0.0);
    let (utility, picks) = search.best;
    let mut allocation = SlotAllocation::empty(instance.slot);
    for (opts, pick) in options.iter().zip(&picks) {
        if let Some(k) = pick {
            allocation.insert(opts[*k].emb.clone());
        }
    }
    Ok(OracleResult { utility, allocation, explored: search.explored })
}

struct Search<'a> {
    instance: &'a GvneInstance<'a>,
    options: &'a [Vec<Placement>],
    tails: &'a [f64],
    node_left: Vec<Vec<f64>>,
    edge_left: Vec<f64>,
    current: Vec<Option<usize>>,
    best: (f64, Vec<Option<usize>>),
    explored: u64,
}

impl Search<'_> {
    fn dfs(&mut self, i: usize, value: f64) {
        if i == self.options.len() {
            self.explored += 1;
            if value > self.best.0 + 1e-12 {
                self.best = (value, self.current.clone());
            }
            return;
        }
        if value + self.tails[i] <= self.best.0 + 1e-12 {
            return;
        }
        let job = &self.instance.jobs[i].job;
        for k in 0..self.options[i].len() {
            let opt = &self.options[i][k];
            if !self.fits(opt, job) {
                continue;
            }
            self.apply(opt, job, -1.0);
            self.current[i] = Some(k);
            self.dfs(i + 1, value + opt.utility);
            self.current[i] = None;
            self.apply(opt, job, 1.0);
        }
        self.dfs(i + 1, value);
    }

    fn fits(&self, opt: &Placement, job: &crate::model::Job) -> bool {
        let nodes_ok = opt.hosts.iter().all(|&(s, c)| {
            self.node_left[s].iter().zip(job.demand.iter()).all(|(left, d)| d * c as f64 <= left + 1e-9)
        });
        let mut need: Vec<(EdgeId, f64)> = Vec::new();
        for &e in &opt.edges {
            match need.iter_mut().find(|(x, _)| *x == e) {
                Some((_, b)) => *b += job.bandwidth,
                None => need.push((e, job.bandwidth)),
            }
        }
        nodes_ok && need.iter().all(|&(e, b)| b <= self.edge_left[e] * (1.0 + 1e-12) + 1e-9)
    }

    fn apply(&mut self, opt: &Placement, job: &crate::model::Job, sign: f64) {
        for &(s, c) in &opt.hosts {
            for (left, d) in self.node_left[s].iter_mut().zip(job.demand.iter()) {
                *left += sign * d * c as f64;
            }
        }
        for &e in &opt.edges {
            self.edge_left[e] += sign * job.bandwidth;
        }
    }
}

fn job_options(ij: &InstanceJob, net: &SubstrateNetwork) -> Vec<Placement> {
    let mut out = Vec::new();
    let cands = &ij.candidates;
    for size in ij.ring_sizes() {
        let utility = ij.increment(size);
        let max_hosts = (size as usize).min(cands.len());
        for m in 1..=max_hosts {
            let mut seqs = Vec::new();
            cyclic_sequences(cands, m, &mut Vec::new(), &mut seqs);
            let mut counts = Vec::new();
            compositions(size, m, &mut Vec::new(), &mut counts);
            for seq in &seqs {
                let Some(routes) = route_cycle(seq, ij.job.bandwidth, net) else {
                    continue;
                };
                for c in &counts {
                    let nodes: Vec<NodeId> =
                        seq.iter().zip(c).flat_map(|(&s, &k)| std::iter::repeat_n(s, k as usize)).collect();
                    let paths = expand_paths(seq, c, &routes);
                    let edges = routes.iter().flatten().copied().collect();
                    out.push(Placement {
                        utility,
                        emb: Embedding { job: ij.id(), nodes, paths },
                        hosts: seq.iter().copied().zip(c.iter().copied()).collect(),
                        edges,
                    });
                }
            }
        }
    }
    out
}

/// Sequences of `m` distinct servers whose first element is the smallest,
/// one per directed cycle.
fn cyclic_sequences(cands: &[NodeId], m: usize, cur: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
    if cur.len() == m {
        out.push(cur.clone());
        return;
    }
    for &s in cands {
        if cur.contains(&s) || cur.first().is_some_and(|&f| s < f) {
            continue;
        }
        cur.push(s);
        cyclic_sequences(cands, m, cur, out);
        cur.pop();
    }
}

fn compositions(total: u32, parts: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if cur.len() + 1 == parts {
        cur.push(total);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    let rest = (parts - cur.len() - 1) as u32;
    for k in 1..=total.saturating_sub(rest) {
        cur.push(k);
        compositions(total - k, parts, cur, out);
        cur.pop();
    }
}

/// Fewest-hop routes between consecutive servers of the cycle, empty for a
/// single server.
fn route_cycle(seq: &[NodeId], bandwidth: f64, net: &SubstrateNetwork) -> Option<Vec<Vec<EdgeId>>> {
    if seq.len() < 2 {
        return Some(Vec::new());
    }
    (0..seq.len())
        .map(|k| net.shortest_path(seq[k], seq[(k + 1) % seq.len()], |e| net.edge(e).bandwidth + 1e-9 >= bandwidth))
        .collect()
}

fn expand_paths(seq: &[NodeId], counts: &[u32], routes: &[Vec<EdgeId>]) -> Vec<Vec<EdgeId>> {
    let size: u32 = counts.iter().sum();
    if size < 2 {
        return Vec::new();
    }
    let mut paths = Vec::new();
    for (k, &c) in counts.iter().enumerate() {
        for _ in 1..c {
            paths.push(Vec::new());
        }
        paths.push(if seq.len() >= 2 { routes[k].clone() } else { Vec::new() });
    }
    paths
}
