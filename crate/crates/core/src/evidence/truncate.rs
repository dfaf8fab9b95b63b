//! Top-B truncation Π_B, tail mass δ_B, and the bound checks built on them.

use ndarray::Array1;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sparse::SparseMap;
use crate::error::{Error, Result};
use crate::rng;

/// Indices of the `b` largest entries, ties to the lower index.
pub fn top_b_indices(p: &[f64], b: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&i, &j| p[j].total_cmp(&p[i]).then(i.cmp(&j)));
    idx.truncate(b);
    idx
}

pub fn nnz(p: &[f64]) -> usize {
    p.iter().filter(|&&x| x > 0.0).count()
}

/// Π_B. Returns the truncated vector and the kept index set
/// (all of the support when no truncation happened).
pub fn top_b_truncate(p: &[f64], b: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    truncate_with(p, b, true)
}

/// Same selection as [`top_b_truncate`] but with renormalization optional;
/// `false` exists only for fault-injection runs of the theory checks.
pub fn truncate_with(p: &[f64], b: usize, renormalize: bool) -> Result<(Vec<f64>, Vec<usize>)> {
    if b == 0 {
        return Err(Error::Validation("truncation budget must be at least 1".into()));
    }
    if nnz(p) <= b {
        let support = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
        return Ok((p.to_vec(), support));
    }
    let kept = top_b_indices(p, b);
    let mass: f64 = kept.iter().map(|&i| p[i]).sum();
    if mass <= 0.0 {
        return Err(Error::Numerical("top-B entries carry zero mass".into()));
    }
    let scale = if renormalize { 1.0 / mass } else { 1.0 };
    let mut out = vec![0.0; p.len()];
    for &i in &kept {
        out[i] = p[i] * scale;
    }
    Ok((out, kept))
}

/// Vector-Jacobian product of renormalized truncation with the kept set fixed.
pub fn truncate_vjp(p: &[f64], kept: &[usize], g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    if nnz(p) <= kept.len() {
        // no truncation happened
        for &i in kept {
            out[i] = g[i];
        }
        return out;
    }
    let mass: f64 = kept.iter().map(|&i| p[i]).sum();
    let inner: f64 = kept.iter().map(|&i| g[i] * p[i] / mass).sum();
    for &j in kept {
        out[j] = (g[j] - inner) / mass;
    }
    out
}

/// δ_B(p): mass outside the top-B entries.
pub fn tail_mass(p: &[f64], b: usize) -> f64 {
    let kept: f64 = top_b_indices(p, b).iter().map(|&i| p[i]).sum();
    (p.iter().sum::<f64>() - kept).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub error: f64,
    pub bound: f64,
    pub holds: bool,
    pub weight_sum: f64,
}

impl TruncationCheck {
    pub fn slack(&self) -> f64 {
        self.bound - self.error
    }
}

/// Compares `‖Σ p_i e_i − Σ Π_B(p)_i e_i‖` against `2M·δ_B(p)`, `M = max ‖e_i‖`.
pub fn verify_truncation_bound(p: &[f64], e: &[Array1<f64>], b: usize, renormalize: bool) -> Result<TruncationCheck> {
    let (q, _) = truncate_with(p, b, renormalize)?;
    let m = e.iter().map(|v| v.dot(v).sqrt()).fold(0.0, f64::max);
    let dim = e.first().map_or(0, |v| v.len());
    let mut diff = Array1::<f64>::zeros(dim);
    for ((&pi, &qi), ei) in p.iter().zip(&q).zip(e) {
        diff.scaled_add(pi - qi, ei);
    }
    let error = diff.dot(&diff).sqrt();
    let bound = 2.0 * m * tail_mass(p, b);
    Ok(TruncationCheck {
        error,
        bound,
        holds: error <= bound + 1e-9,
        weight_sum: q.iter().sum(),
    })
}

/// B-th minus (B+1)-th largest score; infinite when `b ≥ n`.
pub fn top_b_margin(scores: &[f64], b: usize) -> f64 {
    if b >= scores.len() {
        return f64::INFINITY;
    }
    let mut s = scores.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s[b - 1] - s[b]
}

/// The top-B set after sparse attention and truncation, ranked by
/// (weight desc, score desc, index asc) so zero weights are ordered by score.
pub fn selected_set(scores: &[f64], b: usize, map: SparseMap) -> Result<Vec<usize>> {
    let (w, _) = top_b_truncate(&map.apply(scores), b)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| {
        w[j].total_cmp(&w[i])
            .then(scores[j].total_cmp(&scores[i]))
            .then(i.cmp(&j))
    });
    idx.truncate(b);
    idx.sort_unstable();
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOutcome {
    /// `None` when the margin precondition fails and the check is skipped.
    pub margin: Option<f64>,
    pub trials: usize,
    pub changed: usize,
    /// First perturbation that changed the set, for replay.
    pub counterexample: Option<Vec<f64>>,
}

impl StabilityOutcome {
    pub fn holds(&self) -> bool {
        self.changed == 0
    }
}

/// Random coordinate-wise perturbations with `‖δ‖∞ ≤ epsilon`; the set must not move.
pub fn verify_selection_stability(
    scores: &[f64],
    b: usize,
    epsilon: f64,
    trials: usize,
    seed: u64,
    map: SparseMap,
) -> Result<StabilityOutcome> {
    let margin = top_b_margin(scores, b);
    if margin <= 0.0 {
        log::warn!("top-{b} margin is zero, stability check skipped");
        return Ok(StabilityOutcome {
            margin: None,
            trials: 0,
            changed: 0,
            counterexample: None,
        });
    }
    let base = selected_set(scores, b, map)?;
    let mut r = rng::stream(seed, "stability.perturb");
    let mut changed = 0;
    let mut counterexample = None;
    for _ in 0..trials {
        let delta: Vec<f64> = scores.iter().map(|_| r.gen_range(-epsilon..=epsilon)).collect();
        let perturbed: Vec<f64> = scores.iter().zip(&delta).map(|(s, d)| s + d).collect();
        if selected_set(&perturbed, b, map)? != base {
            changed += 1;
            counterexample.get_or_insert(delta);
        }
    }
    Ok(StabilityOutcome {
        margin: Some(margin),
        trials,
        changed,
        counterexample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn truncation_examples() {
        let (q, _) = top_b_truncate(&[0.5, 0.3, 0.2], 2).unwrap();
        assert!((q[0] - 0.625).abs() < 1e-12 && (q[1] - 0.375).abs() < 1e-12 && q[2] == 0.0);
        assert_eq!(top_b_truncate(&[0.5, 0.5, 0.0], 2).unwrap().0, vec![0.5, 0.5, 0.0]);
        assert_eq!(top_b_truncate(&[0.4, 0.4, 0.2], 1).unwrap().0, vec![1.0, 0.0, 0.0]);
        assert!(top_b_truncate(&[1.0], 0).is_err());
    }

    #[test]
    fn worked_bound_example() {
        let e = vec![array![1.0, 0.0, 0.0], array![0.0, 1.0, 0.0], array![0.0, 0.0, 1.0]];
        let c = verify_truncation_bound(&[0.6, 0.3, 0.1], &e, 2, true).unwrap();
        // t_full = (.6,.3,.1), truncated (2/3,1/3,0): diff (−1/15, −1/30, 0.1)
        let oracle = (1.0f64 / 225.0 + 1.0 / 900.0 + 0.01).sqrt();
        assert!((c.error - oracle).abs() < 1e-12);
        assert!((c.error - 0.1247).abs() < 1e-4);
        assert!((c.bound - 0.2).abs() < 1e-12);
        assert!(c.holds);
    }

    #[test]
    fn identical_vectors_give_zero_error() {
        let e = vec![array![0.6, 0.8]; 4];
        let c = verify_truncation_bound(&[0.4, 0.3, 0.2, 0.1], &e, 2, true).unwrap();
        assert!(c.error < 1e-12);
    }

    #[test]
    fn truncation_vjp_matches_finite_differences() {
        let p = [0.4, 0.3, 0.2, 0.1];
        let g = [1.0, -2.0, 0.5, 3.0];
        let (_, kept) = top_b_truncate(&p, 2).unwrap();
        let an = truncate_vjp(&p, &kept, &g);
        let h = 1e-6;
        for j in 0..4 {
            let f = |p: &[f64]| {
                let mass: f64 = kept.iter().map(|&i| p[i]).sum();
                kept.iter().map(|&i| p[i] / mass * g[i]).sum::<f64>()
            };
            let (mut pp, mut pm) = (p.to_vec(), p.to_vec());
            pp[j] += h;
            pm[j] -= h;
            assert!(((f(&pp) - f(&pm)) / (2.0 * h) - an[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn stability_examples() {
        let s = [3.0, 2.0, 0.5];
        assert_eq!(top_b_margin(&s, 2), 1.5);
        assert_eq!(selected_set(&s, 2, SparseMap::Sparsemax).unwrap(), vec![0, 1]);
        // all ±0.7 corners
        for mask in 0..8u32 {
            let d: Vec<f64> = (0..3).map(|i| if mask >> i & 1 == 1 { 0.7 } else { -0.7 }).collect();
            let p: Vec<f64> = s.iter().zip(&d).map(|(a, b)| a + b).collect();
            assert_eq!(selected_set(&p, 2, SparseMap::Sparsemax).unwrap(), vec![0, 1]);
        }
        let out = verify_selection_stability(&s, 2, 0.7, 200, 1, SparseMap::Sparsemax).unwrap();
        assert!(out.holds());
        assert!(verify_selection_stability(&s, 3, 5.0, 50, 1, SparseMap::Sparsemax).unwrap().holds());
        assert!(verify_selection_stability(&s, 2, 0.0, 10, 1, SparseMap::Sparsemax).unwrap().holds());
        // beyond the margin the set can move
        assert_eq!(selected_set(&[3.0, 0.4, 0.5], 2, SparseMap::Sparsemax).unwrap(), vec![0, 2]);
    }

    proptest! {
        #[test]
        fn bound_holds(raw in prop::collection::vec(0.0f64..1.0, 2..9), b in 1usize..5, seed in 0u64..1000) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let mut r = rng::stream(seed, "e");
            let e: Vec<Array1<f64>> = (0..p.len()).map(|_| {
                let mut v = Array1::from_shape_fn(4, |_| rand::Rng::gen_range(&mut r, -1.0..1.0));
                crate::linalg::normalize(&mut v);
                v
            }).collect();
            let c = verify_truncation_bound(&p, &e, b, true).unwrap();
            prop_assert!(c.holds);
            prop_assert!(nnz(&top_b_truncate(&p, b).unwrap().0) <= b);
        }
    }
}
