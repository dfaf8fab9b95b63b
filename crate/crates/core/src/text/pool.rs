use ndarray::Array1;

use crate::linalg::softmax;

/// Softmax attention pooling with the mean chunk vector as query. Returns the
/// pooled vector and whether the input was empty (zero vector returned).
pub fn pool_chunks(chunks: &[Array1<f64>]) -> (Array1<f64>, bool) {
    let Some(first) = chunks.first() else {
        return (Array1::zeros(0), true);
    };
    let d = first.len();
    let mut query = Array1::zeros(d);
    for e in chunks {
        query += e;
    }
    query /= chunks.len() as f64;
    let scale = (d as f64).sqrt();
    let logits = Array1::from_iter(chunks.iter().map(|e| e.dot(&query) / scale));
    let weights = softmax(logits.view());
    let mut pooled = Array1::zeros(d);
    for (w, e) in weights.iter().zip(chunks) {
        pooled.scaled_add(*w, e);
    }
    (pooled, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::l2_norm;
    use ndarray::array;

    #[test]
    fn single_and_identical_chunks() {
        let e = array![0.6, 0.8];
        assert_eq!(pool_chunks(std::slice::from_ref(&e)).0, e);
        let (p, _) = pool_chunks(&[e.clone(), e.clone()]);
        assert!((&p - &e).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn orthogonal_pair_pools_to_midpoint() {
        let (p, flagged) = pool_chunks(&[array![1.0, 0.0], array![0.0, 1.0]]);
        assert!(!flagged);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert!((l2_norm(p.view()) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_input_is_flagged() {
        assert!(pool_chunks(&[]).1);
    }
}
