use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// A graph whose nodes carry raw text, with optional labels and a split.
///
/// Nodes are addressed by dense indices `0..node_count()`; `ids()` maps each
/// index to the identifier the node had in the source dataset. Adjacency is
/// stored as sorted neighbor lists and is symmetric without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct TextAttributedGraph {
    ids: Vec<u64>,
    neighbors: Vec<Vec<usize>>,
    texts: Vec<String>,
    labels: Vec<Option<usize>>,
    splits: Vec<Split>,
    num_classes: usize,
}

impl TextAttributedGraph {
    /// Builds a validated graph. Edges are given as dense index pairs; they are
    /// symmetrized and deduplicated and self-loops are dropped.
    pub fn new(
        ids: Vec<u64>,
        edges: impl IntoIterator<Item = (usize, usize)>,
        texts: Vec<String>,
        labels: Vec<Option<usize>>,
        splits: Vec<Split>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = ids.len();
        if texts.len() != n || labels.len() != n || splits.len() != n {
            return Err(Error::Validation(format!(
                "per-node vectors disagree: {} ids, {} texts, {} labels, {} splits",
                n,
                texts.len(),
                labels.len(),
                splits.len()
            )));
        }
        let mut seen = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if let Some(prev) = seen.insert(*id, i) {
                return Err(Error::Validation(format!(
                    "duplicate node id {id} (indices {prev} and {i})"
                )));
            }
        }
        if let Some((i, c)) = labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&c| c >= num_classes).map(|c| (i, c)))
        {
            return Err(Error::Validation(format!(
                "node {} has class {c} outside [0, {num_classes})",
                ids[i]
            )));
        }
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Validation(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a != b {
                sets[a].insert(b);
                sets[b].insert(a);
            }
        }
        Ok(Self {
            ids,
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            texts,
            labels,
            splits,
            num_classes,
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    pub fn text(&self, v: usize) -> &str {
        &self.texts[v]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels[v]
    }

    pub fn split(&self, v: usize) -> Split {
        self.splits[v]
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn mask(&self, split: Split) -> Vec<bool> {
        self.splits.iter().map(|&s| s == split).collect()
    }

    /// Nodes whose label is visible for training.
    pub fn is_labeled(&self, v: usize) -> bool {
        self.splits[v] == Split::Train && self.labels[v].is_some()
    }

    pub fn nodes_in(&self, split: Split) -> Vec<usize> {
        (0..self.node_count()).filter(|&v| self.splits[v] == split).collect()
    }

    pub fn adjacency(&self) -> CsrMatrix {
        let n = self.node_count();
        let trip = self
            .neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().map(move |&b| (a, b, 1.0)))
            .collect();
        CsrMatrix::from_triplets(n, n, trip)
    }

    /// Same graph with the texts replaced; used for masking experiments.
    pub fn with_texts(&self, texts: Vec<String>) -> Result<Self> {
        if texts.len() != self.node_count() {
            return Err(Error::Validation("text count does not match node count".into()));
        }
        Ok(Self {
            texts,
            ..self.clone()
        })
    }

    /// Subgraph induced by `nodes` (dense indices, in the given order). Only
    /// edges with both endpoints inside are kept.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Self {
        let mut local = HashMap::with_capacity(nodes.len());
        for (i, &v) in nodes.iter().enumerate() {
            local.insert(v, i);
        }
        let neighbors = nodes
            .iter()
            .map(|&v| {
                let mut ns: Vec<usize> = self.neighbors[v].iter().filter_map(|u| local.get(u).copied()).collect();
                ns.sort_unstable();
                ns
            })
            .collect();
        Self {
            ids: nodes.iter().map(|&v| self.ids[v]).collect(),
            neighbors,
            texts: nodes.iter().map(|&v| self.texts[v].clone()).collect(),
            labels: nodes.iter().map(|&v| self.labels[v]).collect(),
            splits: nodes.iter().map(|&v| self.splits[v]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Content hash over ids, structure, texts, labels and splits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.node_count() as u64).to_le_bytes());
        h.update((self.num_classes as u64).to_le_bytes());
        for v in 0..self.node_count() {
            h.update(self.ids[v].to_le_bytes());
            h.update((self.texts[v].len() as u64).to_le_bytes());
            h.update(self.texts[v].as_bytes());
            h.update(self.labels[v].map_or(u64::MAX, |c| c as u64).to_le_bytes());
            h.update([self.splits[v] as u8]);
            for &u in &self.neighbors[v] {
                h.update((u as u64).to_le_bytes());
            }
            h.update([0xff]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
