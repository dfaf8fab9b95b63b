use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::louvain::louvain;
use super::tag::TextAttributedGraph;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMethod {
    Louvain,
    Random,
}

/// One client's induced subgraph plus the mapping back to global indices.
#[derive(Debug, Clone)]
pub struct ClientGraph {
    pub graph: TextAttributedGraph,
    /// `global_index[local]` is the node's dense index in the global graph.
    pub global_index: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ClientPartition {
    pub assignments: Vec<usize>,
    pub clients: Vec<ClientGraph>,
}

impl ClientPartition {
    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }
}

/// Splits the global graph into `m` client subgraphs. Cross-client edges are
/// dropped.
pub fn partition_clients(
    tag: &TextAttributedGraph,
    m: usize,
    method: PartitionMethod,
    seed: u64,
) -> Result<ClientPartition> {
    let n = tag.node_count();
    if m == 0 || m > n {
        return Err(Error::Config(format!("client count {m} must be in [1, {n}]")));
    }
    let assignments = match method {
        PartitionMethod::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng::stream(seed, "partition.random"));
            let mut a = vec![0; n];
            for (i, &v) in order.iter().enumerate() {
                a[v] = i % m;
            }
            a
        }
        PartitionMethod::Louvain => louvain_groups(tag, m),
    };
    let clients = (0..m)
        .map(|c| {
            let nodes: Vec<usize> = (0..n).filter(|&v| assignments[v] == c).collect();
            ClientGraph {
                graph: tag.induced_subgraph(&nodes),
                global_index: nodes,
            }
        })
        .collect();
    Ok(ClientPartition { assignments, clients })
}

fn louvain_groups(tag: &TextAttributedGraph, m: usize) -> Vec<usize> {
    let membership = louvain(tag);
    let k = membership.iter().max().map_or(0, |&c| c + 1);
    let mut communities: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (v, &c) in membership.iter().enumerate() {
        communities[c].push(v);
    }
    while communities.len() < m {
        let (largest, _) = communities
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
            .expect("at least one community");
        let members = std::mem::take(&mut communities[largest]);
        let half = members.len().div_ceil(2);
        log::info!(
            "louvain found fewer communities than clients; splitting community of {} nodes",
            members.len()
        );
        communities[largest] = members[..half].to_vec();
        communities.push(members[half..].to_vec());
    }
    // Greedy bin packing: largest community first into the currently smallest client.
    communities.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let mut sizes = vec![0usize; m];
    let mut assignment = vec![0usize; tag.node_count()];
    for community in &communities {
        let target = (0..m).min_by_key(|&c| (sizes[c], c)).expect("m >= 1");
        sizes[target] += community.len();
        for &v in community {
            assignment[v] = target;
        }
    }
    assignment
}
