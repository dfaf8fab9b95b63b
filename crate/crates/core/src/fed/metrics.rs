use std::collections::BTreeSet;

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

/// Unweighted mean of per-class F1 over classes seen in either vector.
pub fn macro_f1(pred: &[usize], truth: &[usize]) -> f64 {
    let classes: BTreeSet<usize> = pred.iter().chain(truth).copied().collect();
    if classes.is_empty() {
        return 0.0;
    }
    let total: f64 = classes
        .iter()
        .map(|&c| {
            let tp = pred.iter().zip(truth).filter(|(&p, &t)| p == c && t == c).count() as f64;
            let fp = pred.iter().zip(truth).filter(|(&p, &t)| p == c && t != c).count() as f64;
            let fneg = pred.iter().zip(truth).filter(|(&p, &t)| p != c && t == c).count() as f64;
            if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fneg)
            }
        })
        .sum();
    total / classes.len() as f64
}
