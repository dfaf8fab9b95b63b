//! Deterministic Louvain modularity maximization (unit edge weights on input,
//! weighted after aggregation). Nodes are visited in index order and ties go
//! to the lowest community id, so results are reproducible.

use std::collections::BTreeMap;

use super::tag::TextAttributedGraph;

struct Level {
    // adjacency with weights; self-loop weight stored in `self_loops`
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl Level {
    fn degree(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self.self_loops[i]
    }
}

/// Modularity of a partition with unit edge weights.
pub fn modularity(graph: &TextAttributedGraph, communities: &[usize]) -> f64 {
    let m = graph.edge_count() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let k = communities.iter().max().map_or(0, |&c| c + 1);
    let mut internal = vec![0.0; k];
    let mut total = vec![0.0; k];
    for v in 0..graph.node_count() {
        total[communities[v]] += graph.degree(v) as f64;
    }
    for (a, b) in graph.edges() {
        if communities[a] == communities[b] {
            internal[communities[a]] += 1.0;
        }
    }
    (0..k).map(|c| internal[c] / m - (total[c] / (2.0 * m)).powi(2)).sum()
}

/// Returns a community id per node, numbered by first appearance in index order.
pub fn louvain(graph: &TextAttributedGraph) -> Vec<usize> {
    let n = graph.node_count();
    let mut membership: Vec<usize> = (0..n).collect();
    if graph.edge_count() == 0 {
        return membership;
    }
    let mut level = Level {
        adj: (0..n).map(|v| graph.neighbors(v).iter().map(|&u| (u, 1.0)).collect()).collect(),
        self_loops: vec![0.0; n],
    };
    let two_m: f64 = (0..n).map(|i| level.degree(i)).sum();

    loop {
        let (assignment, moved) = local_moves(&level, two_m);
        if !moved {
            break;
        }
        let (relabeled, k) = relabel(&assignment);
        for c in membership.iter_mut() {
            *c = relabeled[*c];
        }
        level = aggregate(&level, &relabeled, k);
    }
    relabel(&membership).0
}

fn local_moves(level: &Level, two_m: f64) -> (Vec<usize>, bool) {
    let n = level.adj.len();
    let mut comm: Vec<usize> = (0..n).collect();
    let degrees: Vec<f64> = (0..n).map(|i| level.degree(i)).collect();
    let mut tot = degrees.clone();
    let mut any_move = false;
    loop {
        let mut improved = false;
        for i in 0..n {
            let own = comm[i];
            let ki = degrees[i];
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            for &(j, w) in &level.adj[i] {
                *links.entry(comm[j]).or_insert(0.0) += w;
            }
            tot[own] -= ki;
            let gain = |c: usize, k_in: f64| k_in - tot[c] * ki / two_m;
            let mut best = own;
            let mut best_gain = gain(own, links.get(&own).copied().unwrap_or(0.0));
            for (&c, &k_in) in &links {
                let g = gain(c, k_in);
                if g > best_gain + 1e-12 {
                    best = c;
                    best_gain = g;
                }
            }
            tot[best] += ki;
            if best != own {
                comm[i] = best;
                improved = true;
                any_move = true;
            }
        }
        if !improved {
            break;
        }
    }
    (comm, any_move)
}

fn relabel(assignment: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let out = assignment
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect();
    (out, map.len())
}

fn aggregate(level: &Level, assignment: &[usize], k: usize) -> Level {
    let mut weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
    let mut self_loops = vec![0.0; k];
    for (i, neighbors) in level.adj.iter().enumerate() {
        let ci = assignment[i];
        self_loops[ci] += level.self_loops[i];
        for &(j, w) in neighbors {
            let cj = assignment[j];
            if ci == cj {
                // each internal edge is seen from both endpoints
                self_loops[ci] += w / 2.0;
            } else {
                *weights[ci].entry(cj).or_insert(0.0) += w;
            }
        }
    }
    Level {
        adj: weights.into_iter().map(|m| m.into_iter().collect()).collect(),
        self_loops,
    }
}
