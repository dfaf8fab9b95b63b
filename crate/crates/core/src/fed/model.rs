//! The global model as a list of named tensors.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::SelectionParams;
use crate::gnn::GcnParams;
use crate::topo::FusionParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    fn matrix(name: &str, m: &Array2<f64>) -> Self {
        Self {
            name: name.to_string(),
            shape: vec![m.nrows(), m.ncols()],
            data: m.iter().copied().collect(),
        }
    }

    fn vector(name: &str, v: &Array1<f64>) -> Self {
        Self {
            name: name.to_string(),
            shape: vec![v.len()],
            data: v.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub gcn: GcnParams,
    pub selection: SelectionParams,
    pub fusion: FusionParams,
    pub round: usize,
}

pub const TENSOR_NAMES: [&str; 12] = [
    "gcn.w1",
    "gcn.w2",
    "selection.w_q",
    "selection.w_k",
    "selection.w_s",
    "selection.gamma",
    "fusion.w_g",
    "fusion.w_t",
    "fusion.w",
    "fusion.dec",
    "fusion.dec_g",
    "fusion.dec_t",
];

impl GlobalModel {
    pub fn init<R: Rng>(d: usize, hidden: usize, classes: usize, dropout: f64, rng: &mut R) -> Self {
        Self {
            gcn: GcnParams::init(d, hidden, classes, dropout, rng),
            selection: SelectionParams::init(d, rng),
            fusion: FusionParams::init(d, classes, rng),
            round: 0,
        }
    }

    pub fn tensors(&self) -> Vec<NamedTensor> {
        let n = TENSOR_NAMES;
        vec![
            NamedTensor::matrix(n[0], &self.gcn.w1),
            NamedTensor::matrix(n[1], &self.gcn.w2),
            NamedTensor::matrix(n[2], &self.selection.w_q),
            NamedTensor::matrix(n[3], &self.selection.w_k),
            NamedTensor::matrix(n[4], &self.selection.w_s),
            NamedTensor::vector(n[5], &self.selection.gamma),
            NamedTensor::matrix(n[6], &self.fusion.w_g),
            NamedTensor::matrix(n[7], &self.fusion.w_t),
            NamedTensor::vector(n[8], &self.fusion.w),
            NamedTensor::matrix(n[9], &self.fusion.dec),
            NamedTensor::matrix(n[10], &self.fusion.dec_g),
            NamedTensor::matrix(n[11], &self.fusion.dec_t),
        ]
    }

    fn slots(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.gcn.w1.as_slice_mut().unwrap(),
            self.gcn.w2.as_slice_mut().unwrap(),
            self.selection.w_q.as_slice_mut().unwrap(),
            self.selection.w_k.as_slice_mut().unwrap(),
            self.selection.w_s.as_slice_mut().unwrap(),
            self.selection.gamma.as_slice_mut().unwrap(),
            self.fusion.w_g.as_slice_mut().unwrap(),
            self.fusion.w_t.as_slice_mut().unwrap(),
            self.fusion.w.as_slice_mut().unwrap(),
            self.fusion.dec.as_slice_mut().unwrap(),
            self.fusion.dec_g.as_slice_mut().unwrap(),
            self.fusion.dec_t.as_slice_mut().unwrap(),
        ]
    }

    /// Overwrites parameters from tensors with matching names and shapes.
    pub fn load_tensors(&mut self, tensors: &[NamedTensor]) -> Result<()> {
        self.combine(tensors, |_, new| new)
    }

    /// `ω += Δ`.
    pub fn apply_delta(&mut self, delta: &[NamedTensor]) -> Result<()> {
        self.combine(delta, |old, d| old + d)
    }

    fn combine(&mut self, tensors: &[NamedTensor], f: impl Fn(f64, f64) -> f64) -> Result<()> {
        let reference = self.tensors();
        if tensors.len() != reference.len() {
            return Err(Error::ShapeMismatch(format!("expected {} tensors, got {}", reference.len(), tensors.len())));
        }
        for (r, t) in reference.iter().zip(tensors) {
            if r.name != t.name || r.shape != t.shape {
                return Err(Error::ShapeMismatch(format!(
                    "parameter group {}: expected {:?}, got {} {:?}",
                    r.name, r.shape, t.name, t.shape
                )));
            }
        }
        for (slot, t) in self.slots().into_iter().zip(tensors) {
            for (x, &v) in slot.iter_mut().zip(&t.data) {
                *x = f(*x, v);
            }
        }
        Ok(())
    }

    /// `self − base`, tensor by tensor.
    pub fn delta_from(&self, base: &GlobalModel) -> Vec<NamedTensor> {
        self.tensors()
            .into_iter()
            .zip(base.tensors())
            .map(|(mut a, b)| {
                a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x -= y);
                a
            })
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|t| t.data).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Wire size with 32-bit floats.
    pub fn payload_bytes(&self) -> usize {
        4 * self.parameter_count()
    }

    pub fn distance(&self, other: &GlobalModel) -> f64 {
        self.flat()
            .iter()
            .zip(other.flat())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// FedAvg: `Σ w_m Δ_m / Σ w_m`.
pub fn aggregate(deltas: &[Vec<NamedTensor>], weights: &[f64]) -> Result<Vec<NamedTensor>> {
    if deltas.is_empty() || deltas.len() != weights.len() {
        return Err(Error::Validation("aggregate needs one weight per delta".into()));
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::Validation("aggregation weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Validation("aggregation weights are all zero".into()));
    }
    let mut out: Vec<NamedTensor> = deltas[0]
        .iter()
        .map(|t| NamedTensor {
            name: t.name.clone(),
            shape: t.shape.clone(),
            data: vec![0.0; t.data.len()],
        })
        .collect();
    for (delta, &w) in deltas.iter().zip(weights) {
        if delta.len() != out.len() {
            return Err(Error::ShapeMismatch(format!("delta has {} tensors, expected {}", delta.len(), out.len())));
        }
        for (acc, t) in out.iter_mut().zip(delta) {
            if acc.name != t.name || acc.shape != t.shape {
                return Err(Error::ShapeMismatch(format!("parameter group {} has shape {:?}, expected {} {:?}", t.name, t.shape, acc.name, acc.shape)));
            }
            for (a, &v) in acc.data.iter_mut().zip(&t.data) {
                *a += w / total * v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn scalar(v: f64) -> Vec<NamedTensor> {
        vec![NamedTensor { name: "s".into(), shape: vec![1], data: vec![v] }]
    }

    #[test]
    fn weighted_mean() {
        let out = aggregate(&[scalar(1.0), scalar(3.0)], &[1.0, 3.0]).unwrap();
        assert!((out[0].data[0] - 2.5).abs() < 1e-12);
        let same = aggregate(&[scalar(0.7), scalar(0.7), scalar(0.7)], &[1.0, 5.0, 2.0]).unwrap();
        assert!((same[0].data[0] - 0.7).abs() < 1e-12);
        assert_eq!(aggregate(&[scalar(4.0)], &[2.0]).unwrap()[0].data, vec![4.0]);
        assert!(aggregate(&[scalar(1.0)], &[0.0]).is_err());
    }

    #[test]
    fn shape_mismatch_names_group() {
        let bad = vec![NamedTensor { name: "s".into(), shape: vec![2], data: vec![0.0; 2] }];
        let err = aggregate(&[scalar(1.0), bad], &[1.0, 1.0]).unwrap_err().to_string();
        assert!(err.contains("parameter group s"));
    }

    #[test]
    fn delta_round_trip() {
        let mut r = rng::stream(0, "m");
        let a = GlobalModel::init(4, 4, 2, 0.5, &mut r);
        let b = GlobalModel::init(4, 4, 2, 0.5, &mut r);
        let d = b.delta_from(&a);
        let mut c = a.clone();
        c.apply_delta(&d).unwrap();
        assert!(c.distance(&b) < 1e-12);
        assert_eq!(a.tensors().len(), TENSOR_NAMES.len());
    }
}
