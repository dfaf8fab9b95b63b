use std::collections::VecDeque;

use super::tag::TextAttributedGraph;
use crate::linalg::CsrMatrix;

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
/// Accepts weighted symmetric nonnegative input.
pub fn normalize_adjacency(a: &CsrMatrix) -> CsrMatrix {
    let n = a.n_rows;
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(a.nnz() + n);
    for r in 0..n {
        for (c, v) in a.row(r) {
            if r != c {
                trip.push((r, c, v));
            }
        }
        trip.push((r, r, 1.0 + a.get(r, r)));
    }
    let with_loops = CsrMatrix::from_triplets(n, n, trip);
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|r| with_loops.row(r).map(|(_, v)| v).sum::<f64>().sqrt().recip())
        .collect();
    let trip = (0..n)
        .flat_map(|r| {
            let inv_sqrt = &inv_sqrt;
            with_loops.row(r).map(move |(c, v)| (r, c, v * inv_sqrt[r] * inv_sqrt[c]))
        })
        .collect();
    CsrMatrix::from_triplets(n, n, trip)
}

/// Nodes at shortest-path distance 0, 1 and 2 from `v`, each sorted.
pub fn hop_sets(tag: &TextAttributedGraph, v: usize) -> [Vec<usize>; 3] {
    let mut dist = vec![usize::MAX; tag.node_count()];
    let mut out: [Vec<usize>; 3] = [vec![v], Vec::new(), Vec::new()];
    dist[v] = 0;
    let mut queue = VecDeque::from([v]);
    while let Some(x) = queue.pop_front() {
        if dist[x] >= 2 {
            continue;
        }
        for &u in tag.neighbors(x) {
            if dist[u] == usize::MAX {
                dist[u] = dist[x] + 1;
                out[dist[u]].push(u);
                queue.push_back(u);
            }
        }
    }
    out[1].sort_unstable();
    out[2].sort_unstable();
    out
}

pub fn k_hop_neighbors(tag: &TextAttributedGraph, v: usize, hop: usize) -> Vec<usize> {
    assert!(hop <= 2, "hop must be 0, 1 or 2");
    let [h0, h1, h2] = hop_sets(tag, v);
    match hop {
        0 => h0,
        1 => h1,
        _ => h2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tag::Split;
    use ndarray::Array2;

    fn graph(n: usize, edges: Vec<(usize, usize)>) -> TextAttributedGraph {
        TextAttributedGraph::new(
            (0..n as u64).collect(),
            edges,
            vec![String::new(); n],
            vec![None; n],
            vec![Split::Test; n],
            0,
        )
        .unwrap()
    }

    #[test]
    fn single_edge_normalizes_to_halves() {
        let a = normalize_adjacency(&graph(2, vec![(0, 1)]).adjacency()).to_dense();
        assert!(a.iter().all(|&x| (x - 0.5).abs() < 1e-12));
    }

    #[test]
    fn empty_graph_normalizes_to_identity() {
        let a = normalize_adjacency(&graph(3, vec![]).adjacency()).to_dense();
        assert_eq!(a, Array2::<f64>::eye(3));
    }

    #[test]
    fn triangle_matches_dense_oracle() {
        let g = graph(3, vec![(0, 1), (1, 2), (0, 2)]);
        let dense = g.adjacency().to_dense() + Array2::<f64>::eye(3);
        let d: Vec<f64> = dense.rows().into_iter().map(|r| r.sum()).collect();
        let oracle = Array2::from_shape_fn((3, 3), |(i, j)| dense[[i, j]] / (d[i] * d[j]).sqrt());
        let a = normalize_adjacency(&g.adjacency()).to_dense();
        for (x, y) in a.iter().zip(oracle.iter()) {
            assert!((x - y).abs() < 1e-12);
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_radius_at_most_one() {
        use crate::graph::synthetic::{generate_synthetic_tag, SyntheticConfig};
        let g = generate_synthetic_tag(&SyntheticConfig { nodes_per_class: 15, ..Default::default() }, 2).unwrap();
        let a = normalize_adjacency(&g.adjacency()).to_dense();
        let a2 = a.dot(&a);
        let rho = crate::linalg::power_iteration_psd(a2.view(), 200).sqrt();
        assert!(rho <= 1.0 + 1e-9, "spectral radius {rho}");
    }

    #[test]
    fn hop_sets_on_small_graphs() {
        let path = graph(3, vec![(0, 1), (1, 2)]);
        assert_eq!(k_hop_neighbors(&path, 0, 2), vec![2]);
        assert_eq!(k_hop_neighbors(&path, 0, 0), vec![0]);
        let iso = graph(2, vec![]);
        assert!(k_hop_neighbors(&iso, 0, 1).is_empty());
        let clique = graph(4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert!(k_hop_neighbors(&clique, 0, 2).is_empty());
        assert_eq!(k_hop_neighbors(&clique, 0, 1), vec![1, 2, 3]);
    }
}
