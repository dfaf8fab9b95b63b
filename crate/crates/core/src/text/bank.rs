use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::chunk::{chunk_text, ChunkSpan};
use super::encoder::Encoder;
use super::pool::pool_chunks;
use crate::error::Result;
use crate::graph::TextAttributedGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeText {
    pub chunks: Vec<ChunkSpan>,
    pub embeddings: Vec<Array1<f64>>,
    pub pooled: Array1<f64>,
    /// Set when the node had no tokens; `pooled` is then the zero vector.
    pub empty: bool,
}

/// Chunk embeddings and pooled node embeddings for every node of one graph,
/// computed once with a frozen encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkEmbeddingBank {
    dim: usize,
    window: usize,
    encoder_fingerprint: String,
    graph_fingerprint: String,
    nodes: Vec<NodeText>,
}

impl ChunkEmbeddingBank {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn encoder_fingerprint(&self) -> &str {
        &self.encoder_fingerprint
    }

    pub fn graph_fingerprint(&self) -> &str {
        &self.graph_fingerprint
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, v: usize) -> &NodeText {
        &self.nodes[v]
    }

    pub fn pooled(&self, v: usize) -> &Array1<f64> {
        &self.nodes[v].pooled
    }

    pub fn chunk_count(&self, v: usize) -> usize {
        self.nodes[v].chunks.len()
    }

    /// Pooled embeddings stacked as rows.
    pub fn node_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.nodes.len(), self.dim));
        for (i, n) in self.nodes.iter().enumerate() {
            m.row_mut(i).assign(&n.pooled);
        }
        m
    }

    /// Hash of every stored vector; used to assert the bank stays frozen.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.encoder_fingerprint.as_bytes());
        for n in &self.nodes {
            for c in &n.chunks {
                h.update((c.start as u64).to_le_bytes());
                h.update((c.end as u64).to_le_bytes());
            }
            for e in n.embeddings.iter().chain(std::iter::once(&n.pooled)) {
                for x in e {
                    h.update(x.to_le_bytes());
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn build_bank(tag: &TextAttributedGraph, window: usize, encoder: &Encoder) -> Result<ChunkEmbeddingBank> {
    let dim = encoder.dim();
    let nodes = (0..tag.node_count())
        .into_par_iter()
        .map(|v| {
            let text = tag.text(v);
            let chunks = chunk_text(text, window);
            let embeddings = chunks
                .iter()
                .enumerate()
                .map(|(r, c)| encoder.encode(tag.ids()[v], r, &text[c.start..c.end]))
                .collect::<Result<Vec<_>>>()?;
            let (pooled, empty) = pool_chunks(&embeddings);
            Ok(NodeText {
                chunks,
                embeddings,
                pooled: if empty { Array1::zeros(dim) } else { pooled },
                empty,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChunkEmbeddingBank {
        dim,
        window,
        encoder_fingerprint: encoder.fingerprint(),
        graph_fingerprint: tag.fingerprint(),
        nodes,
    })
}

/// Builds each (graph, encoder, window) bank at most once.
#[derive(Debug, Default)]
pub struct BankCache {
    entries: HashMap<(String, String, usize), Arc<ChunkEmbeddingBank>>,
    pub hits: usize,
    pub misses: usize,
}

impl BankCache {
    pub fn get_or_build(
        &mut self,
        tag: &TextAttributedGraph,
        window: usize,
        encoder: &Encoder,
    ) -> Result<Arc<ChunkEmbeddingBank>> {
        let key = (tag.fingerprint(), encoder.fingerprint(), window);
        if let Some(bank) = self.entries.get(&key) {
            self.hits += 1;
            return Ok(Arc::clone(bank));
        }
        self.misses += 1;
        let bank = Arc::new(build_bank(tag, window, encoder)?);
        self.entries.insert(key, Arc::clone(&bank));
        Ok(bank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Split;
    use crate::linalg::l2_norm;
    use crate::text::encoder::EncoderConfig;

    fn tag() -> TextAttributedGraph {
        TextAttributedGraph::new(
            vec![10, 11, 12],
            vec![(0, 1)],
            vec!["alpha beta gamma delta".into(), "   ".into(), "beta".into()],
            vec![Some(0), None, Some(1)],
            vec![Split::Train, Split::Test, Split::Val],
            2,
        )
        .unwrap()
    }

    #[test]
    fn caches_and_flags_empty_text() {
        let enc = EncoderConfig::Hash { dim: 16 }.build().unwrap();
        let mut cache = BankCache::default();
        let a = cache.get_or_build(&tag(), 2, &enc).unwrap();
        let b = cache.get_or_build(&tag(), 2, &enc).unwrap();
        assert_eq!((cache.misses, cache.hits), (1, 1));
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(a.node_count(), 3);
        assert!(a.node(1).empty && a.pooled(1).iter().all(|&x| x == 0.0));
        assert_eq!(a.chunk_count(0), 2);
        for v in [0, 2] {
            for e in &a.node(v).embeddings {
                assert!((l2_norm(e.view()) - 1.0).abs() < 1e-6);
            }
            let max_chunk = a.node(v).embeddings.iter().map(|e| l2_norm(e.view())).fold(0.0, f64::max);
            assert!(l2_norm(a.pooled(v).view()) <= max_chunk + 1e-12);
        }
    }
}
