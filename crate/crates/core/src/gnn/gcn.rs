//! Two-layer GCN with hand-written backward pass.

use ndarray::{Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{log_softmax, CsrMatrix};
use crate::topo::glorot;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub dropout: f64,
}

impl GcnParams {
    pub fn init<R: Rng>(d: usize, hidden: usize, classes: usize, dropout: f64, rng: &mut R) -> Self {
        Self {
            w1: glorot(d, hidden, rng),
            w2: glorot(hidden, classes, rng),
            dropout,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnForward {
    pub ax: Array2<f64>,
    pub pre: Array2<f64>,
    /// Inverted-dropout scale per hidden unit (0 or 1/(1−p)); absent in eval mode.
    pub dropout_mask: Option<Array2<f64>>,
    pub hidden: Array2<f64>,
    pub ah: Array2<f64>,
    pub logits: Array2<f64>,
}

/// `H = dropout(ReLU(Â X W1))`, `O = Â H W2`. Dropout applies only when `rng` is given.
pub fn gcn_forward<R: Rng>(a_hat: &CsrMatrix, x: &Array2<f64>, params: &GcnParams, rng: Option<&mut R>) -> Result<GcnForward> {
    if a_hat.n_rows != x.nrows() || a_hat.n_cols != x.nrows() {
        return Err(Error::Dimension(format!(
            "adjacency is {}x{} but features have {} rows",
            a_hat.n_rows,
            a_hat.n_cols,
            x.nrows()
        )));
    }
    if x.ncols() != params.w1.nrows() {
        return Err(Error::Dimension(format!(
            "features have width {} but W1 expects {}",
            x.ncols(),
            params.w1.nrows()
        )));
    }
    let ax = a_hat.matmul(x.view());
    let pre = ax.dot(&params.w1);
    let mut hidden = pre.mapv(|v| v.max(0.0));
    let dropout_mask = match rng {
        Some(rng) if params.dropout > 0.0 => {
            let keep = 1.0 - params.dropout;
            let mask = Array2::from_shape_fn(hidden.raw_dim(), |_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 });
            hidden *= &mask;
            Some(mask)
        }
        _ => None,
    };
    let ah = a_hat.matmul(hidden.view());
    let logits = ah.dot(&params.w2);
    Ok(GcnForward {
        ax,
        pre,
        dropout_mask,
        hidden,
        ah,
        logits,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnGradients {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub ce: f64,
    pub loss: f64,
}

/// Mean CE over labeled rows plus `wd/2 · (‖W1‖² + ‖W2‖²)`, with gradients.
pub fn gcn_gradients(a_hat: &CsrMatrix, fwd: &GcnForward, labels: &[Option<usize>], params: &GcnParams, weight_decay: f64) -> GcnGradients {
    let n_lab = labels.iter().filter(|l| l.is_some()).count();
    let mut d_o = Array2::<f64>::zeros(fwd.logits.raw_dim());
    let mut ce = 0.0;
    for (i, label) in labels.iter().enumerate() {
        if let Some(y) = *label {
            let lp = log_softmax(fwd.logits.row(i));
            ce -= lp[y] / n_lab as f64;
            let mut row = lp.mapv(f64::exp);
            row[y] -= 1.0;
            d_o.row_mut(i).assign(&(row / n_lab as f64));
        }
    }
    let mut w2 = fwd.ah.t().dot(&d_o);
    let at = a_hat.transpose();
    let d_h = at.matmul(d_o.view()).dot(&params.w2.t());
    let mut d_pre = d_h;
    if let Some(mask) = &fwd.dropout_mask {
        d_pre *= mask;
    }
    d_pre.zip_mut_with(&fwd.pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0
        }
    });
    let mut w1 = fwd.ax.t().dot(&d_pre);
    w1.scaled_add(weight_decay, &params.w1);
    w2.scaled_add(weight_decay, &params.w2);
    let sq = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>();
    GcnGradients {
        w1,
        w2,
        ce,
        loss: ce + 0.5 * weight_decay * (sq(&params.w1) + sq(&params.w2)),
    }
}

pub fn apply_gradients(params: &mut GcnParams, grads: &GcnGradients, lr: f64) {
    params.w1.scaled_add(-lr, &grads.w1);
    params.w2.scaled_add(-lr, &grads.w2);
}

/// One full-batch SGD step. Returns `None` (and leaves params alone) without labels.
pub fn gcn_train_step<R: Rng>(
    a_hat: &CsrMatrix,
    x: &Array2<f64>,
    labels: &[Option<usize>],
    params: &mut GcnParams,
    lr: f64,
    weight_decay: f64,
    rng: Option<&mut R>,
) -> Result<Option<f64>> {
    if labels.iter().all(|l| l.is_none()) {
        log::warn!("no labeled nodes on condensed graph, gcn step skipped");
        return Ok(None);
    }
    let fwd = gcn_forward(a_hat, x, params, rng)?;
    let grads = gcn_gradients(a_hat, &fwd, labels, params, weight_decay);
    apply_gradients(params, &grads, lr);
    Ok(Some(grads.loss))
}

/// Row-wise softmax of the logits.
pub fn class_probabilities(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.axis_iter_mut(Axis(0)) {
        let s = crate::linalg::softmax(row.view());
        row.assign(&s);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::normalize_adjacency;
    use crate::rng::{self, StreamRng};
    use ndarray::array;

    type NoRng = StreamRng;

    fn path4() -> CsrMatrix {
        let a = CsrMatrix::from_triplets(4, 4, vec![(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0), (2, 3, 1.0), (3, 2, 1.0)]);
        normalize_adjacency(&a)
    }

    #[test]
    fn zero_weights_give_uniform() {
        let p = GcnParams { w1: Array2::zeros((3, 2)), w2: Array2::zeros((2, 4)), dropout: 0.5 };
        let x = Array2::from_elem((4, 3), 1.0);
        let f = gcn_forward::<NoRng>(&path4(), &x, &p, None).unwrap();
        assert!(f.logits.iter().all(|&v| v == 0.0));
        assert!(class_probabilities(&f.logits).iter().all(|&v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn single_node_hand_computation() {
        let p = GcnParams { w1: array![[1.0, -1.0], [0.5, 2.0]], w2: array![[1.0, 0.0, 2.0], [-1.0, 1.0, 0.5]], dropout: 0.0 };
        let x = array![[2.0, 1.0]];
        let f = gcn_forward::<NoRng>(&CsrMatrix::identity(1), &x, &p, None).unwrap();
        // W1ᵀx = (2.5, 0), ReLU keeps it; W2ᵀh = (2.5, 0, 5)
        assert_eq!(f.logits, array![[2.5, 0.0, 5.0]]);
        let e1 = gcn_forward::<NoRng>(&path4(), &Array2::from_elem((4, 2), 0.3), &p, None).unwrap();
        let e2 = gcn_forward::<NoRng>(&path4(), &Array2::from_elem((4, 2), 0.3), &p, None).unwrap();
        assert_eq!(e1, e2);
    }

    fn random_params(d: usize, h: usize, c: usize, seed: u64) -> GcnParams {
        GcnParams::init(d, h, c, 0.0, &mut rng::stream(seed, "gcn"))
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut r = rng::stream(9, "x");
        let x = Array2::from_shape_fn((4, 5), |_| r.gen_range(-1.0..1.0));
        let labels = [Some(0), None, Some(2), Some(1)];
        let a = path4();
        let p = random_params(5, 6, 3, 1);
        let wd = 5e-3;
        let f = gcn_forward::<NoRng>(&a, &x, &p, None).unwrap();
        let g = gcn_gradients(&a, &f, &labels, &p, wd);
        let loss = |p: &GcnParams| gcn_gradients(&a, &gcn_forward::<NoRng>(&a, &x, p, None).unwrap(), &labels, p, wd).loss;
        let h = 1e-6;
        for (which, grad) in [(0, &g.w1), (1, &g.w2)] {
            for i in 0..grad.len() {
                let (mut pp, mut pm) = (p.clone(), p.clone());
                if which == 0 {
                    pp.w1.as_slice_mut().unwrap()[i] += h;
                    pm.w1.as_slice_mut().unwrap()[i] -= h;
                } else {
                    pp.w2.as_slice_mut().unwrap()[i] += h;
                    pm.w2.as_slice_mut().unwrap()[i] -= h;
                }
                let num = (loss(&pp) - loss(&pm)) / (2.0 * h);
                let an = grad.as_slice().unwrap()[i];
                assert!((num - an).abs() <= 1e-8 + 1e-4 * num.abs().max(an.abs()), "{which}/{i}: {num} vs {an}");
            }
        }
    }

    #[test]
    fn lr_zero_and_pure_decay() {
        let a = path4();
        let x = Array2::from_elem((4, 3), 0.5);
        let mut p = random_params(3, 4, 2, 2);
        let before = p.clone();
        gcn_train_step::<NoRng>(&a, &x, &[Some(0), Some(1), None, None], &mut p, 0.0, 5e-4, None).unwrap();
        assert_eq!(p, before);
        // zero CE gradient: decay alone
        let f = gcn_forward::<NoRng>(&a, &x, &p, None).unwrap();
        let g = gcn_gradients(&a, &f, &[None; 4], &p, 0.1);
        apply_gradients(&mut p, &g, 0.5);
        assert!((&p.w1 - &(&before.w1 * 0.95)).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn loss_decreases_on_separable_toy() {
        let a = normalize_adjacency(&CsrMatrix::from_triplets(4, 4, vec![(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)]));
        let x = array![[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]];
        let labels = [Some(0), Some(0), Some(1), Some(1)];
        let mut p = random_params(2, 4, 2, 3);
        let mut losses = Vec::new();
        for _ in 0..10 {
            losses.push(gcn_train_step::<NoRng>(&a, &x, &labels, &mut p, 0.5, 0.0, None).unwrap().unwrap());
        }
        assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{losses:?}");
    }

    #[test]
    fn permutation_equivariance() {
        let mut r = rng::stream(11, "perm");
        let n = 6;
        let mut trip = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if r.gen::<f64>() < 0.4 {
                    trip.push((i, j, 1.0));
                    trip.push((j, i, 1.0));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, n, trip.clone());
        let x = Array2::from_shape_fn((n, 3), |_| r.gen_range(-1.0..1.0));
        let p = random_params(3, 4, 2, 4);
        let perm = [3, 0, 5, 1, 4, 2];
        let ap = CsrMatrix::from_triplets(n, n, trip.iter().map(|&(i, j, v)| (perm[i], perm[j], v)).collect());
        let mut xp = Array2::zeros((n, 3));
        for i in 0..n {
            xp.row_mut(perm[i]).assign(&x.row(i));
        }
        let o = gcn_forward::<NoRng>(&normalize_adjacency(&a), &x, &p, None).unwrap().logits;
        let op = gcn_forward::<NoRng>(&normalize_adjacency(&ap), &xp, &p, None).unwrap().logits;
        for i in 0..n {
            assert!((&o.row(i) - &op.row(perm[i])).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn dropout_is_seeded() {
        let p = GcnParams { dropout: 0.5, ..random_params(3, 8, 2, 5) };
        let x = Array2::from_elem((4, 3), 1.0);
        let f1 = gcn_forward(&path4(), &x, &p, Some(&mut rng::stream(1, "d"))).unwrap();
        let f2 = gcn_forward(&path4(), &x, &p, Some(&mut rng::stream(1, "d"))).unwrap();
        assert_eq!(f1, f2);
        assert!(f1.dropout_mask.unwrap().iter().any(|&m| m == 0.0));
    }
}
