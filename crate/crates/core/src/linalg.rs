//! Small dense and sparse helpers shared by the numerical modules.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub fn l2_norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Cosine similarity; `None` when either vector is (numerically) zero.
pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Option<f64> {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na < 1e-12 || nb < 1e-12 {
        return None;
    }
    Some((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn normalize(v: &mut Array1<f64>) -> f64 {
    let n = l2_norm(v.view());
    if n > 0.0 {
        v.mapv_inplace(|x| x / n);
    }
    n
}

pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut out = logits.mapv(|x| (x - max).exp());
    let s = out.sum();
    out.mapv_inplace(|x| x / s);
    out
}

pub fn log_softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let lse = logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
    logits.mapv(|x| x - lse)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix by power
/// iteration from the all-ones vector.
pub fn power_iteration_psd(m: ArrayView2<'_, f64>, iters: usize) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = m.dot(&v);
        let nw = l2_norm(w.view());
        if nw < 1e-300 {
            return 0.0;
        }
        lambda = v.dot(&w);
        v = w / nw;
    }
    // Rayleigh quotient of the final iterate.
    lambda.max(v.dot(&m.dot(&v)))
}

/// Compressed sparse row matrix with `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..n_rows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[[r, c]] += v;
            }
        }
        out
    }

    /// Sparse times dense.
    pub fn matmul(&self, dense: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(self.n_cols, dense.nrows(), "spmm inner dimension");
        let mut out = Array2::zeros((self.n_rows, dense.ncols()));
        for r in 0..self.n_rows {
            let mut row = out.row_mut(r);
            for (c, v) in self.row(r) {
                row.scaled_add(v, &dense.row(c));
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, t)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.n_rows == self.n_cols
            && (0..self.n_rows).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn csr_sums_duplicates_and_multiplies() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
        let x = array![[1.0, 0.0], [0.0, 2.0]];
        assert_eq!(m.matmul(x.view()), array![[0.0, 6.0], [1.0, 0.0]]);
    }

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        let m = array![[2.0, 1.0], [1.0, 2.0]];
        assert!((power_iteration_psd(m.view(), 50) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_and_log_softmax_agree() {
        let z = array![1.0, -2.0, 0.5];
        let p = softmax(z.view());
        let lp = log_softmax(z.view());
        for i in 0..3 {
            assert!((p[i].ln() - lp[i]).abs() < 1e-12);
        }
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }
}
