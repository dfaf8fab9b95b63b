//! Masked proximal gradient for sparse self-expression `X ≈ Z X` (rows are samples).

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::power_iteration_psd;

pub const POWER_ITERATIONS: usize = 20;
pub const DESCENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IstaConfig {
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda3: f64,
    /// Step size; `None` means `1 / L` with `L` from power iteration.
    pub eta: Option<f64>,
    pub iterations: usize,
}

impl Default for IstaConfig {
    fn default() -> Self {
        Self {
            alpha: 4.0,
            lambda1: 3.0,
            lambda3: 1.0,
            eta: None,
            iterations: 50,
        }
    }
}

pub fn shrink(z: f64, tau: f64) -> f64 {
    z.signum() * (z.abs() - tau).max(0.0)
}

/// Sparse coefficients on the candidate support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCoefficients {
    pub k: usize,
    pub support: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
}

impl SparseCoefficients {
    pub fn to_dense(&self) -> Array2<f64> {
        let mut z = Array2::zeros((self.k, self.k));
        for (i, (cols, vals)) in self.support.iter().zip(&self.values).enumerate() {
            for (&j, &v) in cols.iter().zip(vals) {
                z[[i, j]] = v;
            }
        }
        z
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().flatten().filter(|&&v| v != 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfExpression {
    pub coefficients: SparseCoefficients,
    /// F(Z_0), F(Z_1), ..., F(Z_L).
    pub objective: Vec<f64>,
    pub eta: f64,
    pub lipschitz: f64,
    /// Iterations where F rose by more than the tolerance.
    pub descent_violations: usize,
}

fn mask(k: usize, candidates: &[Vec<usize>]) -> Array2<bool> {
    let mut m = Array2::from_elem((k, k), false);
    for (i, c) in candidates.iter().enumerate() {
        for &j in c {
            if j != i {
                m[[i, j]] = true;
            }
        }
    }
    m
}

/// `α‖X − ZX‖² + Σ (λ1 + λ3(1 − S_ij)) |Z_ij|` over the support.
pub fn objective(x: ArrayView2<'_, f64>, s: &Array2<f64>, z: &Array2<f64>, cfg: &IstaConfig) -> f64 {
    let r = &x - &z.dot(&x);
    let fit = cfg.alpha * r.iter().map(|v| v * v).sum::<f64>();
    let pen: f64 = z
        .indexed_iter()
        .filter(|(_, &v)| v != 0.0)
        .map(|((i, j), &v)| (cfg.lambda1 + cfg.lambda3 * (1.0 - s[[i, j]])) * v.abs())
        .sum();
    fit + pen
}

pub fn self_expression(x: ArrayView2<'_, f64>, s: &Array2<f64>, candidates: &[Vec<usize>], cfg: &IstaConfig) -> Result<SelfExpression> {
    let k = x.nrows();
    if cfg.iterations == 0 {
        return Err(Error::Config("ista iterations must be at least 1".into()));
    }
    let gram = x.dot(&x.t());
    let lipschitz = 2.0 * cfg.alpha * power_iteration_psd(gram.view(), POWER_ITERATIONS);
    let eta = match cfg.eta {
        Some(e) if e > 0.0 => e,
        Some(e) => return Err(Error::Config(format!("ista step must be positive, got {e}"))),
        None if lipschitz > 0.0 => 1.0 / lipschitz,
        None => 1.0,
    };
    let m = mask(k, candidates);
    let tau = Array2::from_shape_fn((k, k), |(i, j)| eta * (cfg.lambda1 + cfg.lambda3 * (1.0 - s[[i, j]])));
    let mut z = Array2::<f64>::zeros((k, k));
    let mut trace = vec![objective(x, s, &z, cfg)];
    let mut violations = 0;
    for it in 0..cfg.iterations {
        // ∇ α‖X − ZX‖² = 2α (Z G − G)
        let grad = (z.dot(&gram) - &gram) * (2.0 * cfg.alpha);
        let step = &z - &(grad * eta);
        z = Array2::from_shape_fn((k, k), |(i, j)| if m[[i, j]] { shrink(step[[i, j]], tau[[i, j]]) } else { 0.0 });
        let f = objective(x, s, &z, cfg);
        if !f.is_finite() {
            return Err(Error::Numerical(format!(
                "self-expression objective diverged at iteration {it} (eta {eta:.3e}, L {lipschitz:.3e})"
            )));
        }
        if f > trace[trace.len() - 1] + DESCENT_TOL {
            violations += 1;
        }
        trace.push(f);
    }
    let support: Vec<Vec<usize>> = (0..k).map(|i| (0..k).filter(|&j| m[[i, j]]).collect()).collect();
    let values = support.iter().enumerate().map(|(i, c)| c.iter().map(|&j| z[[i, j]]).collect()).collect();
    Ok(SelfExpression {
        coefficients: SparseCoefficients { k, support, values },
        objective: trace,
        eta,
        lipschitz,
        descent_violations: violations,
    })
}
