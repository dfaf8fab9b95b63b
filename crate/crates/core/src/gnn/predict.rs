//! Inference on an original (uncondensed) local graph.

use ndarray::Array2;
use rayon::prelude::*;

use super::gcn::{class_probabilities, gcn_forward, GcnParams};
use crate::condense::entropy;
use crate::error::Result;
use crate::evidence::{compute_evidence, EvidenceConfig, EvidenceInputs, EvidenceTrace, SelectionParams};
use crate::graph::{hop_sets, normalize_adjacency, TextAttributedGraph};
use crate::linalg::{softmax, CsrMatrix};
use crate::rng::StreamRng;
use crate::text::ChunkEmbeddingBank;
use crate::topo::{fuse, FusionParams};

/// Per-graph structures that never change within a run.
#[derive(Debug, Clone)]
pub struct GraphContext {
    pub a_hat: CsrMatrix,
    /// Pooled text embeddings t_u, one row per node.
    pub features: Array2<f64>,
    pub hops: Vec<[Vec<usize>; 3]>,
}

impl GraphContext {
    pub fn new(tag: &TextAttributedGraph, bank: &ChunkEmbeddingBank) -> Self {
        Self {
            a_hat: normalize_adjacency(&tag.adjacency()),
            features: bank.node_matrix(),
            hops: (0..tag.node_count()).map(|v| hop_sets(tag, v)).collect(),
        }
    }
}

/// Eval-mode GCN pass on the original graph.
#[derive(Debug, Clone)]
pub struct BackboneView {
    /// Hidden layer g, one row per node.
    pub g: Array2<f64>,
    pub probs: Array2<f64>,
    pub difficulty: Vec<f64>,
}

pub fn backbone_view(ctx: &GraphContext, gcn: &GcnParams) -> Result<BackboneView> {
    let fwd = gcn_forward::<StreamRng>(&ctx.a_hat, &ctx.features, gcn, None)?;
    let probs = class_probabilities(&fwd.logits);
    let difficulty = probs.rows().into_iter().map(entropy).collect();
    Ok(BackboneView {
        g: fwd.hidden,
        probs,
        difficulty,
    })
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub nodes: Vec<usize>,
    /// One distribution per entry of `nodes`.
    pub probs: Array2<f64>,
    pub traces: Vec<EvidenceTrace>,
}

impl Prediction {
    pub fn predicted_class(&self, i: usize) -> usize {
        let row = self.probs.row(i);
        (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best })
    }
}

/// g from the original graph, then evidence, fusion and the Dec head for each of `nodes`.
#[allow(clippy::too_many_arguments)]
pub fn predict_nodes(
    ctx: &GraphContext,
    bank: &ChunkEmbeddingBank,
    view: &BackboneView,
    selection: &SelectionParams,
    fusion: &FusionParams,
    cfg: &EvidenceConfig,
    nodes: &[usize],
) -> Result<Prediction> {
    let inputs = EvidenceInputs {
        bank,
        g: &view.g,
        hops: &ctx.hops,
        difficulty: &view.difficulty,
    };
    let results: Result<Vec<(EvidenceTrace, ndarray::Array1<f64>)>> = nodes
        .par_iter()
        .map(|&v| {
            let trace = compute_evidence(v, inputs, selection, cfg)?;
            let x = fuse(view.g.row(v), trace.t_tilde.view(), fusion).x;
            let p = softmax(fusion.dec.t().dot(&x).view());
            Ok((trace, p))
        })
        .collect();
    let results = results?;
    let classes = fusion.dec.ncols();
    let mut probs = Array2::zeros((nodes.len(), classes));
    let mut traces = Vec::with_capacity(nodes.len());
    for (i, (trace, p)) in results.into_iter().enumerate() {
        probs.row_mut(i).assign(&p);
        traces.push(trace);
    }
    Ok(Prediction {
        nodes: nodes.to_vec(),
        probs,
        traces,
    })
}

pub fn predict_full(
    tag: &TextAttributedGraph,
    bank: &ChunkEmbeddingBank,
    gcn: &GcnParams,
    selection: &SelectionParams,
    fusion: &FusionParams,
    cfg: &EvidenceConfig,
) -> Result<Prediction> {
    let ctx = GraphContext::new(tag, bank);
    let view = backbone_view(&ctx, gcn)?;
    let nodes: Vec<usize> = (0..tag.node_count()).collect();
    predict_nodes(&ctx, bank, &view, selection, fusion, cfg, &nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic_tag, SyntheticConfig};
    use crate::rng;
    use crate::text::{build_bank, EncoderConfig};

    #[test]
    fn distributions_are_normalized_and_deterministic() {
        let cfg = SyntheticConfig { nodes_per_class: 10, classes: 3, ..SyntheticConfig::default() };
        let tag = generate_synthetic_tag(&cfg, 1).unwrap();
        let enc = EncoderConfig::Hash { dim: 16 }.build().unwrap();
        let bank = build_bank(&tag, 32, &enc).unwrap();
        let mut r = rng::stream(0, "init");
        let gcn = GcnParams::init(16, 16, 3, 0.5, &mut r);
        let sel = SelectionParams::init(16, &mut r);
        let fus = FusionParams::init(16, 3, &mut r);
        let ecfg = EvidenceConfig::default();
        let a = predict_full(&tag, &bank, &gcn, &sel, &fus, &ecfg).unwrap();
        let b = predict_full(&tag, &bank, &gcn, &sel, &fus, &ecfg).unwrap();
        assert_eq!(a.probs, b.probs);
        for row in a.probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }
}
