//! Gated fusion of graph and evidence embeddings, and the fusion objective.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::linalg::{log_softmax, sigmoid, softmax};

pub const LAYER_NORM_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub w_g: Array2<f64>,
    pub w_t: Array2<f64>,
    /// Gate vector over `[g ∥ t̃]`, length 2d.
    pub w: Array1<f64>,
    /// Heads are d×C; logits are `Decᵀ x`.
    pub dec: Array2<f64>,
    pub dec_g: Array2<f64>,
    pub dec_t: Array2<f64>,
}

pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}

impl FusionParams {
    pub fn init<R: Rng>(d: usize, classes: usize, rng: &mut R) -> Self {
        Self {
            w_g: glorot(d, d, rng),
            w_t: glorot(d, d, rng),
            w: Array1::zeros(2 * d),
            dec: glorot(d, classes, rng),
            dec_g: glorot(d, classes, rng),
            dec_t: glorot(d, classes, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w_g: Array2::zeros(self.w_g.raw_dim()),
            w_t: Array2::zeros(self.w_t.raw_dim()),
            w: Array1::zeros(self.w.raw_dim()),
            dec: Array2::zeros(self.dec.raw_dim()),
            dec_g: Array2::zeros(self.dec_g.raw_dim()),
            dec_t: Array2::zeros(self.dec_t.raw_dim()),
        }
    }

    pub fn dim(&self) -> usize {
        self.w_g.nrows()
    }
}

/// Forward intermediates of one fused vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub gate: f64,
    pub projected_t: Array1<f64>,
    pub sigma: f64,
    pub floored: bool,
    pub x: Array1<f64>,
}

pub fn fuse(g: ArrayView1<'_, f64>, t: ArrayView1<'_, f64>, params: &FusionParams) -> Fused {
    let d = params.dim();
    let z = params.w.slice(s![..d]).dot(&g) + params.w.slice(s![d..]).dot(&t);
    let gate = sigmoid(z);
    let projected_t = params.w_t.dot(&t);
    let u = params.w_g.dot(&g) + &projected_t * gate;
    let mean = u.mean().unwrap_or(0.0);
    let centered = u.mapv(|x| x - mean);
    let raw = (centered.dot(&centered) / d as f64).sqrt();
    let floored = raw < LAYER_NORM_FLOOR;
    let sigma = raw.max(LAYER_NORM_FLOOR);
    Fused {
        gate,
        projected_t,
        sigma,
        floored,
        x: centered / sigma,
    }
}

/// Fused features for every row.
pub fn fuse_rows(g: ArrayView2<'_, f64>, t: ArrayView2<'_, f64>, params: &FusionParams) -> Array2<f64> {
    let mut x = Array2::zeros((g.nrows(), params.dim()));
    for i in 0..g.nrows() {
        x.row_mut(i).assign(&fuse(g.row(i), t.row(i), params).x);
    }
    x
}

fn layer_norm_backward(f: &Fused, gx: &Array1<f64>) -> Array1<f64> {
    let mean_g = gx.mean().unwrap_or(0.0);
    if f.floored {
        return gx.mapv(|v| (v - mean_g) / f.sigma);
    }
    let mean_gx = (gx * &f.x).mean().unwrap_or(0.0);
    (gx - mean_g - &f.x * mean_gx) / f.sigma
}

pub fn kl_divergence(p: &Array1<f64>, log_p: &Array1<f64>, log_q: &Array1<f64>) -> f64 {
    p.iter()
        .zip(log_p.iter().zip(log_q))
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(pi, (lp, lq))| pi * (lp - lq))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionLoss {
    pub loss: f64,
    pub ce: f64,
    pub kl: f64,
    pub labeled: usize,
    pub grads: FusionParams,
    /// `∂loss/∂t̃` per row, for the selection backward pass.
    pub grad_t: Array2<f64>,
}

/// Mean CE of `softmax(Decᵀ x)` over rows with a label plus
/// `λ_align` · mean KL(softmax(Dec_gᵀ g) ‖ softmax(Dec_tᵀ t̃)) over all rows.
pub fn fusion_loss(
    g: ArrayView2<'_, f64>,
    t: ArrayView2<'_, f64>,
    labels: &[Option<usize>],
    params: &FusionParams,
    lambda_align: f64,
) -> FusionLoss {
    let (k, d) = (g.nrows(), params.dim());
    let labeled = labels.iter().filter(|l| l.is_some()).count();
    if labeled == 0 {
        log::warn!("no labeled core nodes, cross-entropy term skipped");
    }
    let mut grads = params.zeros_like();
    let mut grad_t = Array2::zeros((k, d));
    let (mut ce, mut kl) = (0.0, 0.0);
    for i in 0..k {
        let (gi, ti) = (g.row(i), t.row(i));
        let mut gt = Array1::<f64>::zeros(d);
        if let Some(y) = labels[i] {
            let f = fuse(gi, ti, params);
            let logits = params.dec.t().dot(&f.x);
            let lp = log_softmax(logits.view());
            ce -= lp[y] / labeled as f64;
            let mut d_o = lp.mapv(f64::exp);
            d_o[y] -= 1.0;
            d_o /= labeled as f64;
            outer_add(&mut grads.dec, &f.x, &d_o);
            let gx = params.dec.dot(&d_o);
            let gu = layer_norm_backward(&f, &gx);
            outer_add(&mut grads.w_g, &gu, &gi.to_owned());
            outer_add(&mut grads.w_t, &(&gu * f.gate), &ti.to_owned());
            let g_gate = gu.dot(&f.projected_t);
            let g_z = g_gate * f.gate * (1.0 - f.gate);
            grads.w.slice_mut(s![..d]).scaled_add(g_z, &gi);
            grads.w.slice_mut(s![d..]).scaled_add(g_z, &ti);
            gt += &(params.w_t.t().dot(&gu) * f.gate);
            gt.scaled_add(g_z, &params.w.slice(s![d..]));
        }
        if lambda_align != 0.0 {
            let lp = log_softmax(params.dec_g.t().dot(&gi).view());
            let lq = log_softmax(params.dec_t.t().dot(&ti).view());
            let p = lp.mapv(f64::exp);
            let q = softmax(params.dec_t.t().dot(&ti).view());
            let kl_i = kl_divergence(&p, &lp, &lq);
            kl += kl_i / k as f64;
            let scale = lambda_align / k as f64;
            let d_og = (&p * &(&lp - &lq - kl_i)) * scale;
            let d_ot = (&q - &p) * scale;
            outer_add(&mut grads.dec_g, &gi.to_owned(), &d_og);
            outer_add(&mut grads.dec_t, &ti.to_owned(), &d_ot);
            gt += &params.dec_t.dot(&d_ot);
        }
        grad_t.row_mut(i).assign(&gt);
    }
    FusionLoss {
        loss: ce + lambda_align * kl,
        ce,
        kl,
        labeled,
        grads,
        grad_t,
    }
}

fn outer_add(m: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai != 0.0 {
            m.row_mut(i).scaled_add(ai, b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    #[test]
    fn gate_and_layer_norm() {
        let mut r = rng::stream(0, "f");
        let mut p = FusionParams::init(4, 2, &mut r);
        let g = array![1.0, 2.0, 0.5, -1.0];
        let t = array![0.3, -0.2, 0.1, 0.9];
        let f = fuse(g.view(), t.view(), &p);
        assert_eq!(f.gate, 0.5);
        assert!(f.x.mean().unwrap().abs() < 1e-12);
        assert!(((f.x.dot(&f.x) / 4.0).sqrt() - 1.0).abs() < 1e-12);
        p.w_g = Array2::eye(4);
        let f0 = fuse(g.view(), Array1::zeros(4).view(), &p);
        let mean = g.mean().unwrap();
        let sd = (g.mapv(|x| (x - mean) * (x - mean)).sum() / 4.0).sqrt();
        assert!((&f0.x - &g.mapv(|x| (x - mean) / sd)).iter().all(|e| e.abs() < 1e-12));
        p.w_g.fill(0.0);
        assert!(fuse(array![1.0, 1.0, 1.0, 1.0].view(), Array1::zeros(4).view(), &p).floored);
    }

    #[test]
    fn identical_views_have_zero_kl() {
        let mut r = rng::stream(1, "f");
        let mut p = FusionParams::init(3, 2, &mut r);
        p.dec_t = p.dec_g.clone();
        let g = array![[0.2, 0.4, -0.3], [1.0, 0.0, 0.5]];
        let out = fusion_loss(g.view(), g.view(), &[None, None], &p, 0.5);
        assert!(out.kl.abs() < 1e-12 && out.ce == 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (k, d, c) = (5, 6, 3);
        let mut r = rng::stream(2, "fd");
        let mut p = FusionParams::init(d, c, &mut r);
        p.w = Array1::from_shape_fn(2 * d, |_| r.gen_range(-0.5..0.5));
        let g = Array2::from_shape_fn((k, d), |_| r.gen_range(-1.0..1.0));
        let t = Array2::from_shape_fn((k, d), |_| r.gen_range(-1.0..1.0));
        let labels = [Some(0), None, Some(2), Some(1), None];
        let lam = 0.7;
        let out = fusion_loss(g.view(), t.view(), &labels, &p, lam);
        let h = 1e-6;
        let loss = |p: &FusionParams, t: &Array2<f64>| fusion_loss(g.view(), t.view(), &labels, p, lam).loss;
        let check = |num: f64, an: f64| assert!((num - an).abs() <= 1e-7 + 1e-4 * num.abs().max(an.abs()), "{num} vs {an}");
        type Get = fn(&mut FusionParams) -> &mut [f64];
        let groups: [Get; 6] = [
            |p| p.w_g.as_slice_mut().unwrap(),
            |p| p.w_t.as_slice_mut().unwrap(),
            |p| p.w.as_slice_mut().unwrap(),
            |p| p.dec.as_slice_mut().unwrap(),
            |p| p.dec_g.as_slice_mut().unwrap(),
            |p| p.dec_t.as_slice_mut().unwrap(),
        ];
        let mut grads = out.grads.clone();
        for get in groups {
            let n = get(&mut p.clone()).len();
            for i in 0..n {
                let (mut pp, mut pm) = (p.clone(), p.clone());
                get(&mut pp)[i] += h;
                get(&mut pm)[i] -= h;
                check((loss(&pp, &t) - loss(&pm, &t)) / (2.0 * h), get(&mut grads)[i]);
            }
        }
        for i in 0..k * d {
            let (mut tp, mut tm) = (t.clone(), t.clone());
            tp.as_slice_mut().unwrap()[i] += h;
            tm.as_slice_mut().unwrap()[i] -= h;
            check((loss(&p, &tp) - loss(&p, &tm)) / (2.0 * h), out.grad_t.as_slice().unwrap()[i]);
        }
    }
}
