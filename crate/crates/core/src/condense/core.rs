use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{class_prototypes, prototype_score};
use super::pseudo::PseudoLabelTable;
use super::quota::{allocate_quotas, Quotas};
use crate::rng::{self, StreamRng};

/// Selected node subset for one client. Node ids are local indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedCore {
    pub node_ids: Vec<usize>,
    pub quotas: Quotas,
    /// Class assigned to each selected node (ground truth or pseudo-label).
    pub classes: Vec<usize>,
    pub confidences: Vec<f64>,
    pub prototype_sets: BTreeMap<usize, Vec<Vec<f64>>>,
    pub scores: BTreeMap<usize, f64>,
    /// Nodes whose embedding was zero and got the sentinel score.
    pub zero_embedding_nodes: Vec<usize>,
}

impl CondensedCore {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }
}

/// `K = ceil(r·n)`, at least 1.
pub fn core_budget(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Per class, the `quota` nodes with highest score (ties to the lower id).
pub fn select_core(table: &PseudoLabelTable, scores: &BTreeMap<usize, f64>, quotas: &Quotas) -> Vec<usize> {
    let mut selected = Vec::with_capacity(quotas.total());
    for (c, &kc) in quotas.per_class.iter().enumerate() {
        let mut members: Vec<(usize, f64)> = table
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.class == Some(c))
            .map(|(v, _)| (v, scores.get(&v).copied().unwrap_or(f64::NEG_INFINITY)))
            .collect();
        members.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        selected.extend(members.into_iter().take(kc).map(|(v, _)| v));
    }
    selected
}

/// Full condensation: class statistics, prototypes, scores and selection.
/// `embeddings` rows are the graph-side embeddings z_v.
pub fn condense_nodes(
    table: &PseudoLabelTable,
    embeddings: &Array2<f64>,
    ratio: f64,
    prototype_cap: usize,
    seed: u64,
) -> CondensedCore {
    let n = table.entries.len();
    let k = core_budget(ratio, n);
    let quotas = allocate_quotas(&table.confident_counts(), k);
    if quotas.shortfall > 0 {
        log::debug!("core budget {k} exceeds confident pool by {}", quotas.shortfall);
    }
    let per_class: Vec<(usize, Vec<Array1<f64>>, Vec<(usize, f64, bool)>)> = (0..table.num_classes)
        .into_par_iter()
        .filter_map(|c| {
            let members: Vec<usize> = (0..n).filter(|&v| table.entries[v].class == Some(c)).collect();
            if members.is_empty() {
                return None;
            }
            let views: Vec<_> = members.iter().map(|&v| embeddings.row(v)).collect();
            let mut r = rng::stream(seed, &format!("condense.kmeans.{c}"));
            let protos = class_prototypes(&views, prototype_cap, &mut r);
            let scored = members
                .iter()
                .map(|&v| {
                    let (s, zero) = prototype_score(embeddings.row(v), &protos);
                    (v, s, zero)
                })
                .collect();
            Some((c, protos, scored))
        })
        .collect();

    let mut scores = BTreeMap::new();
    let mut prototype_sets = BTreeMap::new();
    let mut zero_embedding_nodes = Vec::new();
    for (c, protos, scored) in per_class {
        prototype_sets.insert(c, protos.into_iter().map(|p| p.to_vec()).collect());
        for (v, s, zero) in scored {
            scores.insert(v, s);
            if zero {
                zero_embedding_nodes.push(v);
            }
        }
    }
    zero_embedding_nodes.sort_unstable();
    let node_ids = select_core(table, &scores, &quotas);
    let classes = node_ids.iter().map(|&v| table.entries[v].class.unwrap()).collect();
    let confidences = node_ids
        .iter()
        .map(|&v| {
            let e = &table.entries[v];
            if e.ground_truth {
                1.0
            } else {
                e.confidence
            }
        })
        .collect();
    CondensedCore {
        node_ids,
        quotas,
        classes,
        confidences,
        prototype_sets,
        scores,
        zero_embedding_nodes,
    }
}

/// Baseline core: `K` nodes drawn uniformly, ignoring labels and scores.
/// Unassigned nodes get class `usize::MAX`.
pub fn random_core(table: &PseudoLabelTable, ratio: f64, rng: &mut StreamRng) -> CondensedCore {
    let n = table.entries.len();
    let k = core_budget(ratio, n);
    let mut node_ids = sample(rng, n, k).into_vec();
    node_ids.sort_unstable();
    let mut per_class = vec![0usize; table.num_classes];
    let classes: Vec<usize> = node_ids
        .iter()
        .map(|&v| match table.entries[v].class {
            Some(c) => {
                per_class[c] += 1;
                c
            }
            None => usize::MAX,
        })
        .collect();
    CondensedCore {
        confidences: node_ids.iter().map(|&v| table.entries[v].confidence).collect(),
        node_ids,
        quotas: Quotas {
            per_class,
            shortfall: 0,
        },
        classes,
        prototype_sets: BTreeMap::new(),
        scores: BTreeMap::new(),
        zero_embedding_nodes: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condense::pseudo::assign_pseudo_labels;
    use ndarray::array;

    fn table(n: usize, classes: &[usize]) -> PseudoLabelTable {
        let mut probs = Array2::zeros((n, 2));
        for (v, &c) in classes.iter().enumerate() {
            probs[[v, c]] = 1.0;
        }
        assign_pseudo_labels(&probs, &vec![None; n], 0.5)
    }

    #[test]
    fn ratio_one_keeps_everything() {
        let t = table(4, &[0, 1, 0, 1]);
        let z = array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.1], [0.1, 1.0]];
        let core = condense_nodes(&t, &z, 1.0, 3, 0);
        let mut ids = core.node_ids.clone();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn argmax_and_tie_rule() {
        let t = table(3, &[0, 0, 0]);
        let scores: BTreeMap<usize, f64> = [(0, 0.2), (1, 0.9), (2, 0.9)].into_iter().collect();
        let q = Quotas {
            per_class: vec![1, 0],
            shortfall: 0,
        };
        assert_eq!(select_core(&t, &scores, &q), vec![1]);
        let q2 = Quotas {
            per_class: vec![2, 0],
            shortfall: 0,
        };
        assert_eq!(select_core(&t, &scores, &q2), vec![1, 2]);
    }

    #[test]
    fn budget_rounding() {
        assert_eq!(core_budget(0.08, 80), 7);
        assert_eq!(core_budget(0.08, 100), 8);
        assert_eq!(core_budget(0.5, 1), 1);
    }
}
