use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

/// Per-node pseudo-label record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    /// `None` means unassigned.
    pub class: Option<usize>,
    /// Max predicted probability; labeled nodes count as 1 in class statistics.
    pub confidence: f64,
    /// Entropy of the predicted distribution, in nats.
    pub difficulty: f64,
    pub ground_truth: bool,
}

impl PseudoLabel {
    pub fn is_confident(&self) -> bool {
        self.class.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelTable {
    pub entries: Vec<PseudoLabel>,
    pub num_classes: usize,
}

impl PseudoLabelTable {
    pub fn confident_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for e in &self.entries {
            if let Some(c) = e.class {
                counts[c] += 1;
            }
        }
        counts
    }

    pub fn difficulties(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.difficulty).collect()
    }
}

pub fn entropy(p: ArrayView1<'_, f64>) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// `visible_labels[v]` is the ground-truth label when `v` is in the labeled set.
pub fn assign_pseudo_labels(probs: &Array2<f64>, visible_labels: &[Option<usize>], tau: f64) -> PseudoLabelTable {
    let entries = probs
        .rows()
        .into_iter()
        .zip(visible_labels)
        .map(|(p, &label)| {
            let (argmax, max) = p
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (c, &x)| if x > best.1 { (c, x) } else { best });
            let difficulty = entropy(p).max(0.0);
            match label {
                Some(y) => PseudoLabel {
                    class: Some(y),
                    confidence: max,
                    difficulty,
                    ground_truth: true,
                },
                None => PseudoLabel {
                    class: (max >= tau).then_some(argmax),
                    confidence: max,
                    difficulty,
                    ground_truth: false,
                },
            }
        })
        .collect();
    PseudoLabelTable {
        entries,
        num_classes: probs.ncols(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn threshold_cases() {
        let probs = array![[0.1, 0.9], [0.9, 0.1], [0.55, 0.45]];
        let t = assign_pseudo_labels(&probs, &[Some(0), None, None], 0.8);
        assert_eq!(t.entries[0].class, Some(0));
        assert!(t.entries[0].ground_truth);
        assert_eq!(t.entries[1].class, Some(0));
        assert!((t.entries[1].confidence - 0.9).abs() < 1e-12);
        assert_eq!(t.entries[2].class, None);
        assert_eq!(t.confident_counts(), vec![2, 0]);
    }

    #[test]
    fn uniform_distribution_has_max_entropy() {
        let probs = Array2::from_elem((1, 7), 1.0 / 7.0);
        let t = assign_pseudo_labels(&probs, &[None], 0.5);
        assert_eq!(t.entries[0].class, None);
        assert!((t.entries[0].difficulty - 7f64.ln()).abs() < 1e-12);
        assert!((t.entries[0].difficulty - 1.9459).abs() < 1e-4);
    }
}
