//! Sparse probability maps: sparsemax and 1.5-entmax, with vector-Jacobian products.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SparseMap {
    #[default]
    Sparsemax,
    Entmax15,
}

impl SparseMap {
    /// Maps the entmax exponent (2.0 or 1.5) to a variant.
    pub fn from_alpha(alpha: f64) -> Option<Self> {
        if (alpha - 2.0).abs() < 1e-12 {
            Some(Self::Sparsemax)
        } else if (alpha - 1.5).abs() < 1e-12 {
            Some(Self::Entmax15)
        } else {
            None
        }
    }

    pub fn alpha(self) -> f64 {
        match self {
            Self::Sparsemax => 2.0,
            Self::Entmax15 => 1.5,
        }
    }

    pub fn apply(self, z: &[f64]) -> Vec<f64> {
        match self {
            Self::Sparsemax => sparsemax(z),
            Self::Entmax15 => entmax15(z),
        }
    }

    /// `Jᵀ g` at output `p`.
    pub fn vjp(self, p: &[f64], g: &[f64]) -> Vec<f64> {
        match self {
            Self::Sparsemax => sparsemax_vjp(p, g),
            Self::Entmax15 => entmax15_vjp(p, g),
        }
    }
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn sparsemax(z: &[f64]) -> Vec<f64> {
    if z.is_empty() {
        return Vec::new();
    }
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &zi) in sorted.iter().enumerate() {
        cumsum += zi;
        let k = (i + 1) as f64;
        if 1.0 + k * zi > cumsum {
            tau = (cumsum - 1.0) / k;
        } else {
            break;
        }
    }
    z.iter().map(|&zi| (zi - tau).max(0.0)).collect()
}

pub fn sparsemax_vjp(p: &[f64], g: &[f64]) -> Vec<f64> {
    let support: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let mean = support.iter().map(|&i| g[i]).sum::<f64>() / support.len().max(1) as f64;
    (0..p.len())
        .map(|i| if p[i] > 0.0 { g[i] - mean } else { 0.0 })
        .collect()
}

const ENTMAX_TOL: f64 = 1e-9;

/// 1.5-entmax: `p_i = [z_i/2 - τ]_+²` with τ found by bisection.
pub fn entmax15(z: &[f64]) -> Vec<f64> {
    if z.is_empty() {
        return Vec::new();
    }
    let half: Vec<f64> = z.iter().map(|&x| x / 2.0).collect();
    let max = half.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass = |tau: f64| half.iter().map(|&x| (x - tau).max(0.0).powi(2)).sum::<f64>();
    // mass(lo) ≥ 1 and mass(hi) = 0
    let (mut lo, mut hi) = (max - 1.0, max);
    while hi - lo > ENTMAX_TOL {
        let mid = 0.5 * (lo + hi);
        if mass(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Refine: with the support known, τ solves a quadratic exactly.
    let support: Vec<f64> = half.iter().copied().filter(|&x| x > lo).collect();
    let k = support.len() as f64;
    let s1: f64 = support.iter().sum();
    let s2: f64 = support.iter().map(|x| x * x).sum();
    let disc = s1 * s1 - k * (s2 - 1.0);
    let mut tau = lo;
    if disc >= 0.0 {
        let exact = (s1 - disc.sqrt()) / k;
        let min_in = support.iter().copied().fold(f64::INFINITY, f64::min);
        let max_out = half.iter().copied().filter(|&x| x <= lo).fold(f64::NEG_INFINITY, f64::max);
        if exact < min_in && exact >= max_out - ENTMAX_TOL {
            tau = exact;
        }
    }
    let mut p: Vec<f64> = half.iter().map(|&x| (x - tau).max(0.0).powi(2)).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

pub fn entmax15_vjp(p: &[f64], g: &[f64]) -> Vec<f64> {
    let s: Vec<f64> = p.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let total: f64 = s.iter().sum();
    let sg: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
    s.iter().zip(g).map(|(&si, &gi)| si * gi - si * sg / total).collect()
}
