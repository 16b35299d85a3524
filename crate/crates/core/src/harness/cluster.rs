use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Edge, Node, NodeKind, ResourceVector, SubstrateNetwork};

use super::{parse_kv, HarnessError};

const GBPS: f64 = 1e9;

/// Parameters of a two-level fat-tree: servers under rack switches under
/// one core switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterSpec {
    pub servers: usize,
    pub racks: (usize, usize),
    pub gpu_choices: Vec<u32>,
    /// Memory units per GPU, drawn per server.
    pub mem_per_gpu: Vec<u32>,
    /// Server-to-rack link speed range, Gbps.
    pub server_link_gbps: (u32, u32),
    /// Rack-to-core link speed range, Gbps.
    pub core_link_gbps: (u32, u32),
    pub gpu_only: bool,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            servers: 10,
            racks: (2, 5),
            gpu_choices: vec![1, 2, 4, 8],
            mem_per_gpu: vec![16, 32],
            server_link_gbps: (10, 100),
            core_link_gbps: (200, 3200),
            gpu_only: false,
            seed: 1,
        }
    }
}

impl ClusterSpec {
    /// Parses `servers=10,racks=2-5,seed=7,gpu_only=true` style overrides.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut spec = ClusterSpec::default();
        for (k, v) in parse_kv(text)? {
            match k.as_str() {
                "servers" | "s" => spec.servers = num(&k, &v)?,
                "racks" => spec.racks = range(&k, &v)?,
                "server_gbps" => spec.server_link_gbps = range(&k, &v)?,
                "core_gbps" => spec.core_link_gbps = range(&k, &v)?,
                "gpus" => spec.gpu_choices = list(&k, &v)?,
                "mem_per_gpu" => spec.mem_per_gpu = list(&k, &v)?,
                "gpu_only" => spec.gpu_only = num(&k, &v)?,
                "seed" => spec.seed = num(&k, &v)?,
                _ => return Err(HarnessError::Config(format!("unknown cluster key '{k}'"))),
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.servers < 1 {
            return bad("cluster needs at least one server");
        }
        if self.racks.0 < 1 || self.racks.0 > self.racks.1 {
            return bad("rack range must satisfy 1 <= min <= max");
        }
        if self.gpu_choices.is_empty() || self.gpu_choices.contains(&0) {
            return bad("gpu choices must be nonempty and positive");
        }
        if self.mem_per_gpu.is_empty() {
            return bad("memory-per-GPU choices must be nonempty");
        }
        for (lo, hi) in [self.server_link_gbps, self.core_link_gbps] {
            if lo == 0 || lo > hi {
                return bad("link speed ranges must satisfy 0 < min <= max");
            }
        }
        Ok(())
    }
}

pub(super) fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T, HarnessError> {
    v.parse().map_err(|_| HarnessError::Config(format!("bad value '{v}' for '{k}'")))
}

pub(super) fn range<T: std::str::FromStr + Copy>(k: &str, v: &str) -> Result<(T, T), HarnessError> {
    match v.split_once('-') {
        Some((a, b)) => Ok((num(k, a)?, num(k, b)?)),
        None => {
            let x = num(k, v)?;
            Ok((x, x))
        }
    }
}

fn list<T: std::str::FromStr>(k: &str, v: &str) -> Result<Vec<T>, HarnessError> {
    v.split('/').map(|x| num(k, x)).collect()
}

/// Builds the fat-tree. Servers take ids `0..S`, rack switches follow and
/// the core switch is last. A single server gets no switches or links.
pub fn generate_cluster(spec: &ClusterSpec) -> Result<SubstrateNetwork, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let s = spec.servers;
    let resources: Vec<String> = if spec.gpu_only { vec!["gpu".into()] } else { vec!["gpu".into(), "mem".into()] };

    let racks = if s == 1 { 1 } else { rng.random_range(spec.racks.0..=spec.racks.1.min(s).max(spec.racks.0)) };
    let mut order: Vec<usize> = (0..s).collect();
    order.shuffle(&mut rng);
    let mut rack_of = vec![0; s];
    for (pos, &server) in order.iter().enumerate() {
        rack_of[server] = pos % racks;
    }

    let mut nodes = Vec::new();
    for (id, &rack) in rack_of.iter().enumerate() {
        let gpus = *spec.gpu_choices.choose(&mut rng).expect("nonempty") as f64;
        let per = *spec.mem_per_gpu.choose(&mut rng).expect("nonempty") as f64;
        let capacity = if spec.gpu_only { vec![gpus] } else { vec![gpus, gpus * per] };
        nodes.push(Node { id, kind: NodeKind::Server, capacity: ResourceVector(capacity), rack: Some(rack) });
    }
    let mut edges = Vec::new();
    if s > 1 {
        let zero = ResourceVector::zeros(resources.len());
        for r in 0..racks {
            nodes.push(Node { id: s + r, kind: NodeKind::Switch, capacity: zero.clone(), rack: Some(r) });
        }
        let core = s + racks;
        nodes.push(Node { id: core, kind: NodeKind::Switch, capacity: zero, rack: None });
        let mut link = |a: usize, b: usize, (lo, hi): (u32, u32), rng: &mut ChaCha8Rng| {
            let bw = rng.random_range(lo..=hi) as f64 * GBPS;
            edges.push(Edge { from: a, to: b, bandwidth: bw });
            edges.push(Edge { from: b, to: a, bandwidth: bw });
        };
        for (server, &rack) in rack_of.iter().enumerate() {
            link(server, s + rack, spec.server_link_gbps, &mut rng);
        }
        for r in 0..racks {
            link(s + r, core, spec.core_link_gbps, &mut rng);
        }
    }
    Ok(SubstrateNetwork::new(resources, nodes, edges)?)
}

/// Reads a cluster from JSON (the serialized [`SubstrateNetwork`]) or,
/// for `gen:` arguments, generates one.
pub fn load_cluster(arg: &str) -> Result<SubstrateNetwork, HarnessError> {
    if let Some(spec) = arg.strip_prefix("gen:") {
        return generate_cluster(&ClusterSpec::parse(spec)?);
    }
    let text = std::fs::read_to_string(Path::new(arg)).map_err(|e| HarnessError::Io(format!("{arg}: {e}")))?;
    let net: SubstrateNetwork =
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{arg}: {e}")))?;
    if let Some(issue) = net.topology_issues().into_iter().next() {
        return Err(HarnessError::Config(format!("{arg}: {issue}")));
    }
    Ok(net)
}

/// Drops every resource type except the first (GPU).
pub fn gpu_only(net: &SubstrateNetwork) -> SubstrateNetwork {
    if net.resource_count() <= 1 {
        return net.clone();
    }
    let nodes = net
        .nodes()
        .iter()
        .map(|n| Node { capacity: ResourceVector(vec![n.capacity.get(0)]), ..n.clone() })
        .collect();
    SubstrateNetwork::new(vec![net.resources()[0].clone()], nodes, net.edges().to_vec())
        .expect("projection keeps structure")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_server() {
        let net = generate_cluster(&ClusterSpec { servers: 1, ..Default::default() }).unwrap();
        assert_eq!(net.nodes().len(), 1);
        assert!(net.edges().is_empty());
    }

    #[test]
    fn fat_tree_shape() {
        let spec = ClusterSpec { servers: 50, seed: 3, ..Default::default() };
        let net = generate_cluster(&spec).unwrap();
        assert!(net.topology_issues().is_empty());
        let racks = net.nodes().len() - 50 - 1;
        assert!((2..=5).contains(&racks));
        for n in net.servers() {
            assert!([1.0, 2.0, 4.0, 8.0].contains(&n.capacity.get(0)));
        }
        for e in net.edges() {
            let gbps = e.bandwidth / GBPS;
            let server_link = e.from < 50 || e.to < 50;
            let (lo, hi) = if server_link { (10.0, 100.0) } else { (200.0, 3200.0) };
            assert!(gbps >= lo && gbps <= hi && gbps.fract() == 0.0);
        }
        let a = serde_json::to_string(&net).unwrap();
        let b = serde_json::to_string(&generate_cluster(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spec_strings() {
        let s = ClusterSpec::parse("servers=4,racks=2-2,seed=9,gpu_only=true,gpus=2/4").unwrap();
        assert_eq!((s.servers, s.racks, s.seed, s.gpu_only), (4, (2, 2), 9, true));
        assert_eq!(s.gpu_choices, vec![2, 4]);
        assert!(ClusterSpec::parse("bogus=1").is_err());
        assert!(generate_cluster(&ClusterSpec { servers: 0, ..Default::default() }).is_err());
    }
}
