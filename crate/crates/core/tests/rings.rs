use proptest::prelude::*;
use ringsched::harness::experiment::environment;
use ringsched::model::{validate_ring, Embedding, SubstrateNetwork};

fn network() -> SubstrateNetwork {
    environment("gen:servers=6,racks=2", "gen:jobs=1", 3, 1, false).unwrap().network
}

/// Workers of every host form one contiguous block of the ring order iff
/// the number of host changes around the ring equals the number of hosts.
fn oracle(nodes: &[usize]) -> bool {
    let k = nodes.len();
    let mut hosts = nodes.to_vec();
    hosts.sort();
    hosts.dedup();
    if hosts.len() <= 1 {
        return true;
    }
    let changes = (0..k).filter(|&a| nodes[a] != nodes[(a + 1) % k]).count();
    changes == hosts.len()
}

fn routed(job: u32, nodes: Vec<usize>, net: &SubstrateNetwork) -> Embedding {
    let k = nodes.len();
    let paths = if k < 2 {
        Vec::new()
    } else {
        (0..k).map(|a| net.shortest_path(nodes[a], nodes[(a + 1) % k], |_| true).unwrap()).collect()
    };
    Embedding { job, nodes, paths }
}

proptest! {
    #[test]
    fn matches_contiguity_oracle(picks in prop::collection::vec(0usize..6, 1..9)) {
        let net = network();
        let servers = net.server_ids();
        let nodes: Vec<usize> = picks.iter().map(|&p| servers[p % servers.len()]).collect();
        let emb = routed(1, nodes.clone(), &net);
        prop_assert_eq!(validate_ring(&emb, &net), oracle(&nodes));
    }

    #[test]
    fn broken_paths_are_rejected(picks in prop::collection::vec(0usize..6, 2..7), drop in 0usize..7) {
        let net = network();
        let servers = net.server_ids();
        let nodes: Vec<usize> = picks.iter().map(|&p| servers[p % servers.len()]).collect();
        let mut emb = routed(1, nodes, &net);
        let a = drop % emb.paths.len();
        prop_assume!(!emb.paths[a].is_empty());
        emb.paths[a].pop();
        prop_assert!(!validate_ring(&emb, &net));
    }
}

#[test]
fn non_server_host_is_rejected() {
    let net = network();
    let switch = (0..net.nodes().len()).find(|&n| !net.is_server(n)).unwrap();
    assert!(!validate_ring(&Embedding::colocated(1, switch, 2), &net));
}
