use super::ista::SparseCoefficients;
use crate::linalg::CsrMatrix;

/// `W = |Z| + |Z|ᵀ`, top-k per row (ties to the lower column), then max-symmetrized.
/// The flag is set when no edge survives.
pub fn synthesize_adjacency(z: &SparseCoefficients, k: usize) -> (CsrMatrix, bool) {
    let dense = z.to_dense().mapv(f64::abs);
    let w = &dense + &dense.t();
    let n = z.k;
    let mut kept = vec![vec![false; n]; n];
    for i in 0..n {
        let mut row: Vec<(usize, f64)> = (0..n).filter(|&j| j != i && w[[i, j]] > 0.0).map(|j| (j, w[[i, j]])).collect();
        row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (j, _) in row.into_iter().take(k) {
            kept[i][j] = true;
        }
    }
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if kept[i][j] || kept[j][i] {
                trip.push((i, j, w[[i, j]]));
            }
        }
    }
    let empty = trip.is_empty();
    (CsrMatrix::from_triplets(n, n, trip), empty)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(k: usize, entries: &[(usize, usize, f64)]) -> SparseCoefficients {
        let mut support = vec![Vec::new(); k];
        let mut values = vec![Vec::new(); k];
        for &(i, j, v) in entries {
            support[i].push(j);
            values[i].push(v);
        }
        SparseCoefficients { k, support, values }
    }

    #[test]
    fn cases() {
        let (a, empty) = synthesize_adjacency(&coeffs(3, &[]), 2);
        assert!(empty && a.nnz() == 0);
        let (a, _) = synthesize_adjacency(&coeffs(2, &[(0, 1, 2.0)]), 1);
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(1, 0), 2.0);
        let (a, _) = synthesize_adjacency(&coeffs(4, &[(0, 1, 0.3), (0, 2, -0.2), (0, 3, 0.1)]), 3);
        assert_eq!(a.row(0).count(), 3);
        assert!(a.is_symmetric(0.0));
    }

    #[test]
    fn edge_count_bound() {
        let entries: Vec<(usize, usize, f64)> = (0..6)
            .flat_map(|i| (0..6).filter(move |&j| j != i).map(move |j| (i, j, 1.0 + (i * 6 + j) as f64 * 0.01)))
            .collect();
        let (a, _) = synthesize_adjacency(&coeffs(6, &entries), 2);
        assert!(a.is_symmetric(1e-12));
        assert!(a.nnz() / 2 <= 6 * 2);
        assert!((0..6).all(|i| a.get(i, i) == 0.0));
    }
}
