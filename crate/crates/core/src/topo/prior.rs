use ndarray::{Array2, ArrayView2};

use crate::linalg::cosine;

/// `S_ij = (1 + cos(t̃_i, t̃_j)) / 2`, `S_ii = 1`; pairs touching a zero row get 0.5.
/// Returns the matrix and the zero rows.
pub fn evidence_prior(t: ArrayView2<'_, f64>) -> (Array2<f64>, Vec<usize>) {
    let k = t.nrows();
    let zero: Vec<usize> = (0..k).filter(|&i| t.row(i).iter().all(|&x| x == 0.0)).collect();
    let mut s = Array2::from_elem((k, k), 0.5);
    for i in 0..k {
        s[[i, i]] = 1.0;
        for j in (i + 1)..k {
            if let Some(c) = cosine(t.row(i), t.row(j)) {
                let v = (1.0 + c) / 2.0;
                s[[i, j]] = v;
                s[[j, i]] = v;
            }
        }
    }
    (s, zero)
}

fn top_q(values: impl Iterator<Item = (usize, f64)>, q: usize) -> Vec<usize> {
    let mut v: Vec<(usize, f64)> = values.collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().take(q).map(|(j, _)| j).collect()
}

/// Union of the top-q rows by feature inner product and by prior, diagonal excluded.
pub fn candidate_sets(x: ArrayView2<'_, f64>, s: &Array2<f64>, q: usize) -> Vec<Vec<usize>> {
    let k = x.nrows();
    let gram = x.dot(&x.t());
    (0..k)
        .map(|i| {
            let others = || (0..k).filter(move |&j| j != i);
            let mut c = top_q(others().map(|j| (j, gram[[i, j]])), q);
            c.extend(top_q(others().map(|j| (j, s[[i, j]])), q));
            c.sort_unstable();
            c.dedup();
            c
        })
        .collect()
}
