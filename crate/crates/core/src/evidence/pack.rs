//! Evidence packs: the per-client audit record of what was selected, and summaries of it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::select::EvidenceTrace;
use crate::error::{Error, Result};
use crate::graph::TextAttributedGraph;
use crate::text::ChunkEmbeddingBank;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedNeighbor {
    pub node: u64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceChunk {
    pub source: u64,
    pub chunk: usize,
    /// Byte offsets into the source node's text.
    pub start: usize,
    pub end: usize,
    pub tokens: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidencePack {
    pub core_node: u64,
    pub round: usize,
    pub hops: [Vec<GatedNeighbor>; 3],
    pub chunks: Vec<EvidenceChunk>,
    pub summary: String,
    /// Set when the summary is missing (no chunks or summarizer failure).
    pub summary_missing: bool,
}

impl EvidencePack {
    pub fn chunk_set_hash(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.chunks {
            h.update(c.source.to_le_bytes());
            h.update((c.chunk as u64).to_le_bytes());
            h.update(c.weight.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn token_count(&self) -> usize {
        self.chunks.iter().map(|c| c.tokens).sum()
    }
}

pub fn build_pack(trace: &EvidenceTrace, tag: &TextAttributedGraph, bank: &ChunkEmbeddingBank, round: usize) -> EvidencePack {
    let ids = tag.ids();
    let hops = std::array::from_fn(|l| {
        trace.hops[l]
            .selected()
            .map(|(u, w)| GatedNeighbor { node: ids[u], weight: w })
            .collect()
    });
    let chunks = trace
        .selected_chunks()
        .map(|((u, r), w)| {
            let span = bank.node(u).chunks[r];
            EvidenceChunk {
                source: ids[u],
                chunk: r,
                start: span.start,
                end: span.end,
                tokens: span.tokens,
                weight: w,
            }
        })
        .collect();
    EvidencePack {
        core_node: ids[trace.node],
        round,
        hops,
        chunks,
        summary: String::new(),
        summary_missing: true,
    }
}

pub struct SummaryItem<'a> {
    pub text: &'a str,
    pub node: u64,
    pub chunk: usize,
    pub weight: f64,
}

pub trait Summarizer: Send + Sync {
    fn summarize(&self, items: &[SummaryItem<'_>]) -> Result<String>;
}

/// Chunk texts in descending weight, each followed by `[node#chunk]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractiveSummarizer;

impl Summarizer for ExtractiveSummarizer {
    fn summarize(&self, items: &[SummaryItem<'_>]) -> Result<String> {
        let mut order: Vec<&SummaryItem<'_>> = items.iter().collect();
        order.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        Ok(order
            .iter()
            .map(|it| format!("{} [{}#{}]", it.text, it.node, it.chunk))
            .collect::<Vec<_>>()
            .join(" "))
    }
}

/// Summaries keyed by (core node, chunk-set hash), reused across rounds.
#[derive(Debug, Default)]
pub struct SummaryCache {
    entries: HashMap<(u64, String), String>,
    pub hits: usize,
    pub misses: usize,
}

impl SummaryCache {
    /// Fills `pack.summary`. `text_of` maps a global node id to its text.
    pub fn summarize_pack<'a>(
        &mut self,
        pack: &mut EvidencePack,
        summarizer: &dyn Summarizer,
        text_of: impl Fn(u64) -> Option<&'a str>,
    ) {
        if pack.chunks.is_empty() {
            pack.summary.clear();
            pack.summary_missing = true;
            return;
        }
        let key = (pack.core_node, pack.chunk_set_hash());
        if let Some(s) = self.entries.get(&key) {
            self.hits += 1;
            pack.summary = s.clone();
            pack.summary_missing = false;
            return;
        }
        self.misses += 1;
        let items: Result<Vec<SummaryItem<'a>>> = pack
            .chunks
            .iter()
            .map(|c| {
                let text = text_of(c.source)
                    .and_then(|t| t.get(c.start..c.end))
                    .ok_or_else(|| Error::Invariant(format!("chunk {}#{} has no valid span", c.source, c.chunk)))?;
                Ok(SummaryItem {
                    text,
                    node: c.source,
                    chunk: c.chunk,
                    weight: c.weight,
                })
            })
            .collect();
        match items.and_then(|it| summarizer.summarize(&it)) {
            Ok(s) => {
                self.entries.insert(key, s.clone());
                pack.summary = s;
                pack.summary_missing = false;
            }
            Err(e) => {
                log::warn!("summary for node {} failed: {e}", pack.core_node);
                pack.summary.clear();
                pack.summary_missing = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pack(chunks: Vec<EvidenceChunk>) -> EvidencePack {
        EvidencePack {
            core_node: 7,
            round: 1,
            hops: [vec![GatedNeighbor { node: 7, weight: 1.0 }], vec![], vec![]],
            chunks,
            summary: String::new(),
            summary_missing: true,
        }
    }

    #[test]
    fn extractive_format_and_cache() {
        let text = "foo bar";
        let mut p = pack(vec![EvidenceChunk { source: 7, chunk: 0, start: 0, end: 7, tokens: 2, weight: 1.0 }]);
        let mut cache = SummaryCache::default();
        cache.summarize_pack(&mut p, &ExtractiveSummarizer, |_| Some(text));
        assert_eq!(p.summary, "foo bar [7#0]");
        let mut q = p.clone();
        cache.summarize_pack(&mut q, &ExtractiveSummarizer, |_| Some(text));
        assert_eq!((cache.hits, cache.misses), (1, 1));
        assert_eq!(q.summary, p.summary);
    }

    #[test]
    fn ordering_and_empty() {
        let text = "aa bb";
        let mut p = pack(vec![
            EvidenceChunk { source: 7, chunk: 0, start: 0, end: 2, tokens: 1, weight: 0.3 },
            EvidenceChunk { source: 7, chunk: 1, start: 3, end: 5, tokens: 1, weight: 0.7 },
        ]);
        let mut cache = SummaryCache::default();
        cache.summarize_pack(&mut p, &ExtractiveSummarizer, |_| Some(text));
        assert_eq!(p.summary, "bb [7#1] aa [7#0]");
        let mut e = pack(vec![]);
        cache.summarize_pack(&mut e, &ExtractiveSummarizer, |_| Some(text));
        assert!(e.summary.is_empty() && e.summary_missing);
    }
}
