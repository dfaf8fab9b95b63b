//! Mini-batch k-means with k-means++ seeding, fixed iteration count.

use ndarray::{Array1, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;

use crate::linalg::cosine;
use crate::rng::StreamRng;

pub const KMEANS_ITERATIONS: usize = 50;
pub const KMEANS_MAX_BATCH: usize = 256;

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ArrayView1<'_, f64>, centers: &[Array1<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(point, c.view())))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn kmeans_plus_plus(points: &[ArrayView1<'_, f64>], k: usize, rng: &mut StreamRng) -> Vec<Array1<f64>> {
    let mut centers = vec![points[rng.gen_range(0..points.len())].to_owned()];
    let mut chosen = vec![false; points.len()];
    while centers.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(*p, &centers).1).collect();
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            // All remaining points coincide with a center.
            (0..points.len()).find(|&i| !chosen[i]).unwrap_or(0)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        chosen[idx] = true;
        centers.push(points[idx].to_owned());
    }
    centers
}

/// `min(cap, n)` prototypes for one class.
pub fn class_prototypes(points: &[ArrayView1<'_, f64>], cap: usize, rng: &mut StreamRng) -> Vec<Array1<f64>> {
    assert!(!points.is_empty(), "class must be nonempty");
    let k = cap.min(points.len()).max(1);
    if k == points.len() {
        return points.iter().map(|p| p.to_owned()).collect();
    }
    let mut centers = kmeans_plus_plus(points, k, rng);
    let mut counts = vec![0usize; k];
    let batch = KMEANS_MAX_BATCH.min(points.len());
    for _ in 0..KMEANS_ITERATIONS {
        let mut idx: Vec<usize> = if batch == points.len() {
            (0..points.len()).collect()
        } else {
            sample(rng, points.len(), batch).into_vec()
        };
        idx.sort_unstable();
        let assigned: Vec<usize> = idx.iter().map(|&i| nearest(points[i], &centers).0).collect();
        for (&i, &c) in idx.iter().zip(&assigned) {
            counts[c] += 1;
            let eta = 1.0 / counts[c] as f64;
            let center = &mut centers[c];
            center.zip_mut_with(&points[i], |cv, &x| *cv = (1.0 - eta) * *cv + eta * x);
        }
    }
    centers
}

/// Sentinel score for a zero embedding.
pub const ZERO_EMBEDDING_SCORE: f64 = -1.0;

/// Best cosine match against the class prototypes. A zero embedding (or only
/// zero prototypes) scores [`ZERO_EMBEDDING_SCORE`] and the flag is set.
pub fn prototype_score(z: ArrayView1<'_, f64>, prototypes: &[Array1<f64>]) -> (f64, bool) {
    prototypes
        .iter()
        .filter_map(|p| cosine(z, p.view()))
        .reduce(f64::max)
        .map_or((ZERO_EMBEDDING_SCORE, true), |s| (s, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    #[test]
    fn separable_clusters_recover_means() {
        let pts = [array![0.0, 0.0], array![0.0, 0.1], array![5.0, 5.0], array![5.0, 5.1]];
        let views: Vec<_> = pts.iter().map(|p| p.view()).collect();
        // Full-batch oracle: the two cluster means.
        let oracle = [array![0.0, 0.05], array![5.0, 5.05]];
        for seed in 0..5 {
            let mut c = class_prototypes(&views, 2, &mut rng::stream(seed, "kmeans"));
            c.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
            for (got, want) in c.iter().zip(&oracle) {
                assert!((got - want).iter().all(|x| x.abs() < 1e-6), "seed {seed}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn singleton_and_determinism() {
        let p = array![1.0, 2.0];
        assert_eq!(class_prototypes(&[p.view()], 3, &mut rng::stream(0, "k")), vec![p.clone()]);
        let pts: Vec<Array1<f64>> = (0..40).map(|i| array![(i % 7) as f64, (i % 3) as f64]).collect();
        let views: Vec<_> = pts.iter().map(|p| p.view()).collect();
        let a = class_prototypes(&views, 4, &mut rng::stream(3, "k"));
        let b = class_prototypes(&views, 4, &mut rng::stream(3, "k"));
        assert_eq!(a, b);
    }

    #[test]
    fn cosine_prototype_scores() {
        let z = array![1.0, 0.0];
        assert!((prototype_score(z.view(), std::slice::from_ref(&z)).0 - 1.0).abs() < 1e-12);
        assert!(prototype_score(z.view(), &[array![0.0, 1.0]]).0.abs() < 1e-12);
        let s = 0.5f64.sqrt();
        let got = prototype_score(z.view(), &[array![s, s], array![0.0, 1.0]]).0;
        assert!((got - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
        assert_eq!(prototype_score(array![0.0, 0.0].view(), std::slice::from_ref(&z)), (-1.0, true));
    }
}
