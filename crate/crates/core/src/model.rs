//! Cluster and job data model, plus validators for the per-slot constraints
//! (worker caps, budgets, node/edge capacities, ring topology).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rartime::{RarParams, UtilitySpec};

pub type NodeId = usize;
pub type EdgeId = usize;
pub type JobId = u32;

/// Index of the GPU dimension in every [`ResourceVector`].
pub const GPU: usize = 0;
/// Index of the memory dimension when the cluster models memory.
pub const MEM: usize = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("resource vector has {got} entries, cluster registry has {expected}")]
    ResourceArity { expected: usize, got: usize },
    #[error("negative or non-finite amount {value} for resource {resource}")]
    BadAmount { resource: usize, value: f64 },
    #[error("node {0} is a switch with non-zero capacity")]
    SwitchCapacity(NodeId),
    #[error("node ids must be dense and ordered; found {found} at position {position}")]
    NodeOrder { position: usize, found: NodeId },
    #[error("edge {edge} references unknown node {node}")]
    UnknownNode { edge: EdgeId, node: NodeId },
    #[error("edge {0} is a self loop")]
    SelfLoop(EdgeId),
    #[error("edge {edge} has invalid bandwidth {bandwidth}")]
    BadBandwidth { edge: EdgeId, bandwidth: f64 },
    #[error("job {job}: {reason}")]
    InvalidJob { job: JobId, reason: String },
    #[error("embedding for job {job}: {reason}")]
    InvalidEmbedding { job: JobId, reason: String },
}

/// Per-resource-type amounts, indexed by the cluster's resource registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceVector(pub Vec<f64>);

impl ResourceVector {
    pub fn zeros(n: usize) -> Self {
        ResourceVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, r: usize) -> f64 {
        self.0[r]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        ResourceVector(self.0.iter().map(|v| v * k).collect())
    }

    pub fn add_scaled(&mut self, other: &ResourceVector, k: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b * k;
        }
    }

    /// Largest number of copies of `unit` that fit inside `self`, over the
    /// dimensions where `unit` is positive. `None` when `unit` is all zero.
    pub fn copies_of(&self, unit: &ResourceVector) -> Option<u32> {
        self.0
            .iter()
            .zip(&unit.0)
            .filter(|(_, &u)| u > 0.0)
            .map(|(&c, &u)| ((c / u) + 1e-9).floor().max(0.0) as u32)
            .min()
    }

    fn check(&self, arity: usize) -> Result<(), ModelError> {
        if self.0.len() != arity {
            return Err(ModelError::ResourceArity { expected: arity, got: self.0.len() });
        }
        for (resource, &value) in self.0.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::BadAmount { resource, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Server,
    Switch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub capacity: ResourceVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rack: Option<usize>,
}

/// A directed link with bandwidth in bits per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkRepr {
    resources: Vec<String>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

/// Directed substrate graph of servers, switches and links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct SubstrateNetwork {
    resources: Vec<String>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
}

impl TryFrom<NetworkRepr> for SubstrateNetwork {
    type Error = ModelError;
    fn try_from(r: NetworkRepr) -> Result<Self, ModelError> {
        SubstrateNetwork::new(r.resources, r.nodes, r.edges)
    }
}

impl From<SubstrateNetwork> for NetworkRepr {
    fn from(n: SubstrateNetwork) -> Self {
        NetworkRepr { resources: n.resources, nodes: n.nodes, edges: n.edges }
    }
}

impl SubstrateNetwork {
    /// Builds the network, checking structural invariants. Topological
    /// properties (bidirectional links, strong connectivity) are reported by
    /// [`SubstrateNetwork::topology_issues`] instead, so small hand-built
    /// graphs such as a one-way triangle remain expressible.
    pub fn new(resources: Vec<String>, nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, ModelError> {
        let arity = resources.len();
        for (position, node) in nodes.iter().enumerate() {
            if node.id != position {
                return Err(ModelError::NodeOrder { position, found: node.id });
            }
            node.capacity.check(arity)?;
            if node.kind == NodeKind::Switch && !node.capacity.is_zero() {
                return Err(ModelError::SwitchCapacity(node.id));
            }
        }
        let mut out_edges = vec![Vec::new(); nodes.len()];
        let mut in_edges = vec![Vec::new(); nodes.len()];
        for (id, e) in edges.iter().enumerate() {
            for n in [e.from, e.to] {
                if n >= nodes.len() {
                    return Err(ModelError::UnknownNode { edge: id, node: n });
                }
            }
            if e.from == e.to {
                return Err(ModelError::SelfLoop(id));
            }
            if !e.bandwidth.is_finite() || e.bandwidth < 0.0 {
                return Err(ModelError::BadBandwidth { edge: id, bandwidth: e.bandwidth });
            }
            out_edges[e.from].push(id);
            in_edges[e.to].push(id);
        }
        Ok(SubstrateNetwork { resources, nodes, edges, out_edges, in_edges })
    }

    pub fn resources(&self) -> &[String] {
        &self.resources
    }

    pub fn resource_count(&self) -> usize {
        self.resources.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn out_edges(&self, u: NodeId) -> &[EdgeId] {
        &self.out_edges[u]
    }

    pub fn in_edges(&self, u: NodeId) -> &[EdgeId] {
        &self.in_edges[u]
    }

    pub fn servers(&self) -> impl Iterator<Item = &Node> + '_ {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Server)
    }

    pub fn server_ids(&self) -> Vec<NodeId> {
        self.servers().map(|n| n.id).collect()
    }

    pub fn is_server(&self, id: NodeId) -> bool {
        self.nodes.get(id).is_some_and(|n| n.kind == NodeKind::Server)
    }

    /// Sum of server capacities per resource type.
    pub fn total_capacity(&self) -> ResourceVector {
        let mut total = ResourceVector::zeros(self.resource_count());
        for n in self.servers() {
            total.add_scaled(&n.capacity, 1.0);
        }
        total
    }

    /// Copy with node capacities and edge bandwidths multiplied.
    pub fn scaled(&self, node_factor: f64, edge_factor: f64) -> SubstrateNetwork {
        let mut out = self.clone();
        for n in &mut out.nodes {
            n.capacity = n.capacity.scaled(node_factor);
        }
        for e in &mut out.edges {
            e.bandwidth *= edge_factor;
        }
        out
    }

    /// Reports violations of the physical-cluster invariants: every link
    /// present in both directions and the whole graph strongly connected.
    pub fn topology_issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let pairs: BTreeSet<(NodeId, NodeId)> = self.edges.iter().map(|e| (e.from, e.to)).collect();
        for &(u, v) in &pairs {
            if !pairs.contains(&(v, u)) {
                issues.push(format!("link {u}->{v} has no reverse edge"));
            }
        }
        if !self.nodes.is_empty() {
            let fwd = self.reachable_from(0, false);
            let bwd = self.reachable_from(0, true);
            if fwd.len() != self.nodes.len() || bwd.len() != self.nodes.len() {
                issues.push("network is not strongly connected".to_string());
            }
        }
        issues
    }

    fn reachable_from(&self, start: NodeId, reverse: bool) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            let adj = if reverse { &self.in_edges[u] } else { &self.out_edges[u] };
            for &e in adj {
                let v = if reverse { self.edges[e].from } else { self.edges[e].to };
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Fewest-hop path from `from` to `to` using only edges accepted by
    /// `usable`. Ties go to the lowest edge ids. `Some(vec![])` when the
    /// endpoints coincide.
    pub fn shortest_path(
        &self,
        from: NodeId,
        to: NodeId,
        mut usable: impl FnMut(EdgeId) -> bool,
    ) -> Option<Vec<EdgeId>> {
        if from == to {
            return Some(Vec::new());
        }
        let mut parent: Vec<Option<EdgeId>> = vec![None; self.nodes.len()];
        let mut seen = vec![false; self.nodes.len()];
        seen[from] = true;
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.out_edges[u] {
                let v = self.edges[e].to;
                if seen[v] || !usable(e) {
                    continue;
                }
                seen[v] = true;
                parent[v] = Some(e);
                if v == to {
                    let mut path = vec![e];
                    let mut cur = u;
                    while cur != from {
                        let pe = parent[cur].expect("bfs parent");
                        path.push(pe);
                        cur = self.edges[pe].from;
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(v);
            }
        }
        None
    }
}

/// A ring-all-reduce training job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    /// First slot (1-based) in which the job may receive workers.
    pub arrival: u32,
    pub max_workers: u32,
    /// Per-worker resource demand.
    pub demand: ResourceVector,
    /// Total per-resource budget over the job's lifetime.
    pub budget: ResourceVector,
    /// Reserved bandwidth per ring edge, bits per second.
    pub bandwidth: f64,
    /// Progress units produced by one worker in one slot.
    pub efficiency: f64,
    pub utility: UtilitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rar: Option<RarParams>,
}

impl Job {
    pub fn validate(&self, resources: usize) -> Result<(), ModelError> {
        let bad = |reason: &str| ModelError::InvalidJob { job: self.id, reason: reason.to_string() };
        self.demand.check(resources)?;
        self.budget.check(resources)?;
        if self.arrival < 1 {
            return Err(bad("arrival must be >= 1 (slots are 1-based)"));
        }
        if self.max_workers < 1 {
            return Err(bad("max_workers must be >= 1"));
        }
        if !self.demand.iter().any(|d| d > 0.0) {
            return Err(bad("per-worker demand must be positive in some resource"));
        }
        for (d, f) in self.demand.iter().zip(self.budget.iter()) {
            if d > 0.0 && f < d {
                return Err(bad("budget below a single worker's demand"));
            }
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(bad("bandwidth must be positive"));
        }
        if !(self.efficiency > 0.0 && self.efficiency.is_finite()) {
            return Err(bad("efficiency must be positive"));
        }
        self.utility.validate().map_err(|e| bad(&e))?;
        Ok(())
    }

    /// Worker-slots the budget allows: `min_r F^r / l^r` over demanded types.
    pub fn budget_worker_slots(&self) -> f64 {
        self.demand
            .iter()
            .zip(self.budget.iter())
            .filter(|(d, _)| *d > 0.0)
            .map(|(d, f)| f / d)
            .fold(f64::INFINITY, f64::min)
    }

    /// Remaining whole workers allowed this slot given accumulated worker-slots.
    pub fn headroom(&self, z_prev: u64) -> u32 {
        let rem = self.budget_worker_slots() - z_prev as f64;
        if rem <= 0.0 {
            0
        } else {
            (rem + 1e-9).floor().min(u32::MAX as f64) as u32
        }
    }

    pub fn ring_request(&self, size: u32) -> RingRequest {
        RingRequest {
            job: self.id,
            size,
            node_demand: self.demand.clone(),
            edge_demand: self.bandwidth,
        }
    }
}

/// A κ-worker directed ring request with uniform demands.
#[derive(Debug, Clone, PartialEq)]
pub struct RingRequest {
    pub job: JobId,
    pub size: u32,
    pub node_demand: ResourceVector,
    pub edge_demand: f64,
}

impl RingRequest {
    /// Virtual edges `(a, (a+1) mod κ)`; empty for κ = 1.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        ring_edges(self.size)
    }
}

pub fn ring_edges(size: u32) -> Vec<(u32, u32)> {
    if size < 2 {
        Vec::new()
    } else {
        (0..size).map(|a| (a, (a + 1) % size)).collect()
    }
}

/// Integral mapping of a ring request into the substrate.
///
/// `paths[a]` routes virtual edge `(a, a+1 mod κ)`; it is empty when both
/// endpoints share a server.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Embedding {
    pub job: JobId,
    pub nodes: Vec<NodeId>,
    pub paths: Vec<Vec<EdgeId>>,
}

impl Embedding {
    pub fn new(
        job: JobId,
        nodes: Vec<NodeId>,
        paths: Vec<Vec<EdgeId>>,
        net: &SubstrateNetwork,
    ) -> Result<Self, ModelError> {
        let emb = Embedding { job, nodes, paths };
        emb.check(net)?;
        Ok(emb)
    }

    /// Single-server embedding of `size` workers.
    pub fn colocated(job: JobId, server: NodeId, size: u32) -> Self {
        let paths = if size < 2 { Vec::new() } else { vec![Vec::new(); size as usize] };
        Embedding { job, nodes: vec![server; size as usize], paths }
    }

    pub fn empty(job: JobId) -> Self {
        Embedding { job, nodes: Vec::new(), paths: Vec::new() }
    }

    pub fn size(&self) -> u32 {
        self.nodes.len() as u32
    }

    /// Structural invariants: server-only node map, one path per virtual
    /// edge, each path contiguous from ω(a) to ω(b) and simple.
    pub fn check(&self, net: &SubstrateNetwork) -> Result<(), ModelError> {
        let bad = |reason: String| ModelError::InvalidEmbedding { job: self.job, reason };
        for &n in &self.nodes {
            if !net.is_server(n) {
                return Err(bad(format!("node {n} is not a server")));
            }
        }
        let edges = ring_edges(self.size());
        if self.paths.len() != edges.len() {
            return Err(bad(format!("{} paths for {} virtual edges", self.paths.len(), edges.len())));
        }
        for (path, (a, b)) in self.paths.iter().zip(edges) {
            let (src, dst) = (self.nodes[a as usize], self.nodes[b as usize]);
            if src == dst {
                if !path.is_empty() {
                    return Err(bad(format!("virtual edge ({a},{b}) is co-located but routed")));
                }
                continue;
            }
            let mut cur = src;
            let mut used = BTreeSet::new();
            for &e in path {
                if e >= net.edges().len() {
                    return Err(bad(format!("unknown edge {e}")));
                }
                if !used.insert(e) {
                    return Err(bad(format!("path for ({a},{b}) repeats edge {e}")));
                }
                let edge = net.edge(e);
                if edge.from != cur {
                    return Err(bad(format!("path for ({a},{b}) is not contiguous at edge {e}")));
                }
                cur = edge.to;
            }
            if cur != dst {
                return Err(bad(format!("path for ({a},{b}) ends at {cur}, expected {dst}")));
            }
        }
        Ok(())
    }
}

/// Worker counts `y` and usage indicators `x` per server for one embedding.
pub fn derive_counts(emb: &Embedding) -> (BTreeMap<NodeId, u32>, BTreeMap<NodeId, bool>) {
    let mut y = BTreeMap::new();
    for &n in &emb.nodes {
        *y.entry(n).or_insert(0) += 1;
    }
    let x = y.iter().map(|(&n, &c)| (n, c >= 1)).collect();
    (y, x)
}

/// True iff the embedding forms one big cycle over its hosting servers (or
/// all workers share one server).
pub fn validate_ring(emb: &Embedding, net: &SubstrateNetwork) -> bool {
    if emb.check(net).is_err() {
        return false;
    }
    let hosts: BTreeSet<NodeId> = emb.nodes.iter().copied().collect();
    if hosts.len() <= 1 {
        return true;
    }
    let k = emb.nodes.len();
    let mut next: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut indeg: BTreeMap<NodeId, usize> = BTreeMap::new();
    for a in 0..k {
        let (s, t) = (emb.nodes[a], emb.nodes[(a + 1) % k]);
        if s == t {
            continue;
        }
        if next.insert(s, t).is_some() {
            return false;
        }
        *indeg.entry(t).or_default() += 1;
    }
    if next.len() != hosts.len() || indeg.len() != hosts.len() || indeg.values().any(|&d| d != 1) {
        return false;
    }
    // `next` is a permutation of the hosts; it is one cycle iff a walk from
    // any host sees all of them before repeating
    let start = *hosts.iter().next().expect("non-empty");
    let mut visited = BTreeSet::new();
    let mut walk = start;
    while visited.insert(walk) {
        walk = next[&walk];
    }
    visited.len() == hosts.len()
}

/// Allocation decided for one time slot.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotAllocation {
    pub slot: u32,
    pub embeddings: BTreeMap<JobId, Embedding>,
}

impl SlotAllocation {
    pub fn empty(slot: u32) -> Self {
        SlotAllocation { slot, embeddings: BTreeMap::new() }
    }

    pub fn insert(&mut self, emb: Embedding) {
        if emb.nodes.is_empty() {
            self.embeddings.remove(&emb.job);
        } else {
            self.embeddings.insert(emb.job, emb);
        }
    }

    /// Total workers `Σ_s y_is` granted to `job`.
    pub fn workers(&self, job: JobId) -> u32 {
        self.embeddings.get(&job).map_or(0, |e| e.size())
    }

    pub fn embedded_jobs(&self) -> usize {
        self.embeddings.values().filter(|e| !e.nodes.is_empty()).count()
    }

    /// `y_is` for every job.
    pub fn counts(&self) -> BTreeMap<JobId, BTreeMap<NodeId, u32>> {
        self.embeddings.iter().map(|(&j, e)| (j, derive_counts(e).0)).collect()
    }

    /// Aggregate node loads per resource, indexed by node id.
    pub fn node_loads(&self, jobs: &BTreeMap<JobId, &Job>, net: &SubstrateNetwork) -> Vec<ResourceVector> {
        let mut loads = vec![ResourceVector::zeros(net.resource_count()); net.nodes().len()];
        for (jid, emb) in &self.embeddings {
            if let Some(job) = jobs.get(jid) {
                for &n in &emb.nodes {
                    loads[n].add_scaled(&job.demand, 1.0);
                }
            }
        }
        loads
    }

    /// Aggregate bandwidth per substrate edge.
    pub fn edge_loads(&self, jobs: &BTreeMap<JobId, &Job>, net: &SubstrateNetwork) -> Vec<f64> {
        let mut loads = vec![0.0; net.edges().len()];
        for (jid, emb) in &self.embeddings {
            if let Some(job) = jobs.get(jid) {
                for path in &emb.paths {
                    for &e in path {
                        loads[e] += job.bandwidth;
                    }
                }
            }
        }
        loads
    }
}

/// Multipliers applied to node and edge capacities during validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitySlack {
    pub node: Vec<f64>,
    pub edge: f64,
}

impl CapacitySlack {
    pub fn strict(resources: usize) -> Self {
        CapacitySlack { node: vec![1.0; resources], edge: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MaxWorkers { job: JobId, workers: u32, limit: u32 },
    Budget { job: JobId, workers: u32, headroom: f64 },
    BeforeArrival { job: JobId, arrival: u32 },
    NodeCapacity { node: NodeId, resource: usize, load: f64, capacity: f64 },
    EdgeCapacity { edge: EdgeId, load: f64, capacity: f64 },
    Ring { job: JobId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MaxWorkers { job, workers, limit } => {
                write!(f, "job {job}: {workers} workers exceeds cap {limit}")
            }
            Violation::Budget { job, workers, headroom } => {
                write!(f, "job {job}: {workers} workers exceeds budget headroom {headroom}")
            }
            Violation::BeforeArrival { job, arrival } => {
                write!(f, "job {job}: allocated before arrival slot {arrival}")
            }
            Violation::NodeCapacity { node, resource, load, capacity } => {
                write!(f, "node {node} resource {resource}: load {load} > {capacity}")
            }
            Violation::EdgeCapacity { edge, load, capacity } => {
                write!(f, "edge {edge}: load {load} > {capacity}")
            }
            Violation::Ring { job } => write!(f, "job {job}: placement does not form a single ring"),
        }
    }
}

const CAP_TOL: f64 = 1e-9;

/// Checks one slot against the hard constraints with strict capacities.
pub fn validate_slot(
    alloc: &SlotAllocation,
    jobs: &[Job],
    net: &SubstrateNetwork,
    z_prev: &BTreeMap<JobId, u64>,
) -> Result<Vec<Violation>, ModelError> {
    validate_slot_relaxed(alloc, jobs, net, z_prev, &CapacitySlack::strict(net.resource_count()))
}

/// As [`validate_slot`], with node and edge capacities multiplied by `slack`.
/// Worker caps, budgets and arrival times are never relaxed.
pub fn validate_slot_relaxed(
    alloc: &SlotAllocation,
    jobs: &[Job],
    net: &SubstrateNetwork,
    z_prev: &BTreeMap<JobId, u64>,
    slack: &CapacitySlack,
) -> Result<Vec<Violation>, ModelError> {
    let by_id: BTreeMap<JobId, &Job> = jobs.iter().map(|j| (j.id, j)).collect();
    for (&jid, emb) in &alloc.embeddings {
        if emb.job != jid {
            return Err(ModelError::InvalidEmbedding {
                job: jid,
                reason: format!("keyed under job {jid} but belongs to job {}", emb.job),
            });
        }
        if !by_id.contains_key(&jid) {
            return Err(ModelError::InvalidEmbedding { job: jid, reason: "unknown job".into() });
        }
        emb.check(net)?;
    }

    let mut out = Vec::new();
    for (&jid, emb) in &alloc.embeddings {
        let job = by_id[&jid];
        let workers = emb.size();
        if workers == 0 {
            continue;
        }
        if alloc.slot < job.arrival {
            out.push(Violation::BeforeArrival { job: jid, arrival: job.arrival });
        }
        if workers > job.max_workers {
            out.push(Violation::MaxWorkers { job: jid, workers, limit: job.max_workers });
        }
        let headroom = job.budget_worker_slots() - z_prev.get(&jid).copied().unwrap_or(0) as f64;
        if workers as f64 > headroom + CAP_TOL {
            out.push(Violation::Budget { job: jid, workers, headroom });
        }
        if !validate_ring(emb, net) {
            out.push(Violation::Ring { job: jid });
        }
    }

    for (node, load) in alloc.node_loads(&by_id, net).iter().enumerate() {
        let cap = &net.node(node).capacity;
        for r in 0..load.len() {
            let limit = cap.get(r) * slack.node.get(r).copied().unwrap_or(1.0);
            if load.get(r) > limit + CAP_TOL {
                out.push(Violation::NodeCapacity { node, resource: r, load: load.get(r), capacity: limit });
            }
        }
    }
    for (edge, &load) in alloc.edge_loads(&by_id, net).iter().enumerate() {
        let limit = net.edge(edge).bandwidth * slack.edge;
        if load > limit * (1.0 + CAP_TOL) + CAP_TOL {
            out.push(Violation::EdgeCapacity { edge, load, capacity: limit });
        }
    }
    Ok(out)
}

/// Time-indexed allocations with per-job accumulated worker-slots.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    slots: Vec<SlotAllocation>,
    /// `z_{i,t}` for t = 1..=len, per job.
    accumulated: BTreeMap<JobId, Vec<u64>>,
    completion: BTreeMap<JobId, u32>,
}

impl Schedule {
    pub fn new(jobs: &[Job]) -> Self {
        Schedule {
            slots: Vec::new(),
            accumulated: jobs.iter().map(|j| (j.id, Vec::new())).collect(),
            completion: BTreeMap::new(),
        }
    }

    /// Appends the next slot's allocation. At most one allocation per slot,
    /// and slots must arrive in order.
    pub fn push(&mut self, alloc: SlotAllocation, jobs: &[Job]) {
        let t = self.slots.len() as u32 + 1;
        assert_eq!(alloc.slot, t, "allocations must be appended one per slot, in order");
        for job in jobs {
            let hist = self.accumulated.entry(job.id).or_default();
            while hist.len() + 1 < t as usize {
                let last = hist.last().copied().unwrap_or(0);
                hist.push(last);
            }
            let prev = hist.last().copied().unwrap_or(0);
            let z = prev + alloc.workers(job.id) as u64;
            hist.push(z);
            if !self.completion.contains_key(&job.id) && z as f64 >= job.budget_worker_slots() - 1e-9 {
                self.completion.insert(job.id, t);
            }
        }
        self.slots.push(alloc);
    }

    pub fn len(&self) -> u32 {
        self.slots.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[SlotAllocation] {
        &self.slots
    }

    pub fn slot(&self, t: u32) -> Option<&SlotAllocation> {
        t.checked_sub(1).and_then(|i| self.slots.get(i as usize))
    }

    /// `z_{i,t}`; zero for t = 0 or unknown jobs.
    pub fn accumulated(&self, job: JobId, t: u32) -> u64 {
        if t == 0 {
            return 0;
        }
        self.accumulated
            .get(&job)
            .and_then(|h| h.get((t as usize).min(h.len()).checked_sub(1)?))
            .copied()
            .unwrap_or(0)
    }

    pub fn final_accumulated(&self, job: JobId) -> u64 {
        self.accumulated(job, self.len())
    }

    pub fn accumulators_at(&self, t: u32) -> BTreeMap<JobId, u64> {
        self.accumulated.keys().map(|&j| (j, self.accumulated(j, t))).collect()
    }

    pub fn completion_slot(&self, job: JobId) -> Option<u32> {
        self.completion.get(&job).copied()
    }
}
