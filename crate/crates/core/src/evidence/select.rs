//! Budgeted neighbor gating, hierarchical context and chunk selection for one node,
//! plus the backward pass into the selection parameters.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sparse::SparseMap;
use super::truncate::{truncate_vjp, truncate_with};
use crate::error::{Error, Result};
use crate::text::ChunkEmbeddingBank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub b1: usize,
    pub b2: usize,
    pub b_tok: usize,
    /// Difficulty prefilter cap for hop-2 candidates; `None` means `b2`.
    pub two_hop_prefilter: Option<usize>,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            b1: 3,
            b2: 2,
            b_tok: 4,
            two_hop_prefilter: None,
        }
    }
}

impl Budgets {
    pub fn hop(&self, hop: usize) -> usize {
        [1, self.b1, self.b2][hop]
    }

    pub fn prefilter_cap(&self) -> usize {
        self.two_hop_prefilter.unwrap_or(self.b2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b1 == 0 || self.b2 == 0 || self.b_tok == 0 {
            return Err(Error::Config("budgets must be at least 1".into()));
        }
        if self.prefilter_cap() < self.b2 {
            return Err(Error::Config("two_hop_prefilter must be at least b2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceConfig {
    pub budgets: Budgets,
    pub sparse: SparseMap,
    pub mix: f64,
    /// Only ever `false` under fault injection.
    pub renormalize: bool,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            budgets: Budgets::default(),
            sparse: SparseMap::Sparsemax,
            mix: 0.6,
            renormalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionParams {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_s: Array2<f64>,
    pub gamma: Array1<f64>,
}

impl SelectionParams {
    /// Near-identity projections and uniform hop weights.
    pub fn init<R: Rng>(d: usize, rng: &mut R) -> Self {
        let mut near_eye = || {
            let scale = 0.1 / (d as f64).sqrt();
            Array2::from_shape_fn((d, d), |(i, j)| if i == j { 1.0 } else { 0.0 } + scale * rng.gen_range(-1.0..1.0))
        };
        Self {
            w_q: near_eye(),
            w_k: near_eye(),
            w_s: near_eye(),
            gamma: Array1::from_elem(3, 1.0 / 3.0),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let d = self.w_q.nrows();
        Self {
            w_q: Array2::zeros((d, d)),
            w_k: Array2::zeros((d, d)),
            w_s: Array2::zeros((d, d)),
            gamma: Array1::zeros(3),
        }
    }

    pub fn dim(&self) -> usize {
        self.w_q.nrows()
    }

    /// Puts γ back on the simplex.
    pub fn project_gamma(&mut self) {
        let p = super::sparse::sparsemax(self.gamma.as_slice().unwrap());
        self.gamma = Array1::from(p);
    }
}

/// Read-only inputs shared by every node of one client.
#[derive(Clone, Copy)]
pub struct EvidenceInputs<'a> {
    pub bank: &'a ChunkEmbeddingBank,
    /// Graph-side embeddings g, one row per local node.
    pub g: &'a Array2<f64>,
    pub hops: &'a [[Vec<usize>; 3]],
    /// Difficulty u_w per local node.
    pub difficulty: &'a [f64],
}

/// The `cap` candidates with the highest difficulty, ties to the lower id.
pub fn prefilter_two_hop(candidates: &[usize], difficulty: &[f64], cap: usize) -> Vec<usize> {
    if candidates.len() <= cap {
        return candidates.to_vec();
    }
    let mut c = candidates.to_vec();
    c.sort_by(|&a, &b| difficulty[b].total_cmp(&difficulty[a]).then(a.cmp(&b)));
    c.truncate(cap);
    c.sort_unstable();
    c
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HopGate {
    pub candidates: Vec<usize>,
    pub scores: Vec<f64>,
    /// Sparse attention output before truncation.
    pub pre: Vec<f64>,
    pub weights: Vec<f64>,
    pub kept: Vec<usize>,
}

impl HopGate {
    /// `(node, α)` pairs with positive weight.
    pub fn selected(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.candidates
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&u, &w)| (u, w))
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Everything the backward pass needs for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceTrace {
    pub node: usize,
    pub hops: [HopGate; 3],
    pub gamma_eff: [f64; 3],
    pub gamma_mass: f64,
    pub hop_vectors: [Array1<f64>; 3],
    pub context: Array1<f64>,
    pub query_source: Array1<f64>,
    pub query: Array1<f64>,
    pub chunks: Vec<(usize, usize)>,
    pub chunk_scores: Vec<f64>,
    pub chunk_pre: Vec<f64>,
    pub chunk_weights: Vec<f64>,
    pub chunk_kept: Vec<usize>,
    pub t_tilde: Array1<f64>,
    /// No candidate chunks: t̃ is zero.
    pub empty: bool,
}

impl EvidenceTrace {
    pub fn neighbor_count(&self) -> usize {
        self.hops.iter().map(|h| h.selected().count()).sum()
    }

    pub fn chunk_nnz(&self) -> usize {
        self.chunk_weights.iter().filter(|&&w| w > 0.0).count()
    }

    pub fn selected_chunks(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.chunks
            .iter()
            .zip(&self.chunk_weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&c, &w)| (c, w))
    }
}

fn gate_hop(candidates: Vec<usize>, qg: &Array1<f64>, inputs: EvidenceInputs<'_>, params: &SelectionParams, budget: usize, cfg: &EvidenceConfig) -> Result<HopGate> {
    if candidates.is_empty() {
        return Ok(HopGate::default());
    }
    let scale = (params.dim() as f64).sqrt();
    let scores: Vec<f64> = candidates
        .iter()
        .map(|&u| qg.dot(&params.w_k.dot(inputs.bank.pooled(u))) / scale)
        .collect();
    let pre = cfg.sparse.apply(&scores);
    let (weights, kept) = truncate_with(&pre, budget, cfg.renormalize)?;
    Ok(HopGate {
        candidates,
        scores,
        pre,
        weights,
        kept,
    })
}

/// Per-hop gates α for node `v`: hop 0 is `{v}`; hop 2 is difficulty-prefiltered.
pub fn gate_neighbors(v: usize, inputs: EvidenceInputs<'_>, params: &SelectionParams, cfg: &EvidenceConfig) -> Result<[HopGate; 3]> {
    let g_v = inputs.g.row(v);
    if g_v.len() != params.dim() {
        return Err(Error::Dimension(format!(
            "graph embedding has width {} but selection parameters expect {}",
            g_v.len(),
            params.dim()
        )));
    }
    let qg = params.w_q.dot(&g_v);
    let hop1 = inputs.hops[v][1].clone();
    let hop2 = prefilter_two_hop(&inputs.hops[v][2], inputs.difficulty, cfg.budgets.prefilter_cap());
    Ok([
        gate_hop(vec![v], &qg, inputs, params, 1, cfg)?,
        gate_hop(hop1, &qg, inputs, params, cfg.budgets.b1, cfg)?,
        gate_hop(hop2, &qg, inputs, params, cfg.budgets.b2, cfg)?,
    ])
}

/// c_v with γ renormalized over nonempty hops. Returns (c, per-hop sums, effective γ, mass).
pub fn hierarchical_context(
    gates: &[HopGate; 3],
    bank: &ChunkEmbeddingBank,
    gamma: ArrayView1<'_, f64>,
) -> (Array1<f64>, [Array1<f64>; 3], [f64; 3], f64) {
    let d = bank.dim();
    let hop_vectors: [Array1<f64>; 3] = std::array::from_fn(|l| {
        let mut h = Array1::zeros(d);
        for (u, a) in gates[l].selected() {
            h.scaled_add(a, bank.pooled(u));
        }
        h
    });
    let present: Vec<usize> = (0..3).filter(|&l| !gates[l].is_empty()).collect();
    let mass: f64 = present.iter().map(|&l| gamma[l]).sum();
    let mut eff = [0.0; 3];
    for &l in &present {
        eff[l] = if mass > 0.0 { gamma[l] / mass } else { 1.0 / present.len() as f64 };
    }
    let mut c = Array1::zeros(d);
    for l in 0..3 {
        if eff[l] > 0.0 {
            c.scaled_add(eff[l], &hop_vectors[l]);
        }
    }
    (c, hop_vectors, eff, mass)
}

/// Gating, context and chunk selection for node `v`.
pub fn compute_evidence(v: usize, inputs: EvidenceInputs<'_>, params: &SelectionParams, cfg: &EvidenceConfig) -> Result<EvidenceTrace> {
    let hops = gate_neighbors(v, inputs, params, cfg)?;
    let (context, hop_vectors, gamma_eff, gamma_mass) = hierarchical_context(&hops, inputs.bank, params.gamma.view());
    let query_source = &inputs.g.row(v) * cfg.mix + &context * (1.0 - cfg.mix);
    let query = params.w_s.dot(&query_source);
    let mut chunks = Vec::new();
    for hop in &hops {
        for (u, _) in hop.selected() {
            chunks.extend((0..inputs.bank.chunk_count(u)).map(|r| (u, r)));
        }
    }
    let d = params.dim();
    let mut t_tilde = Array1::zeros(d);
    if chunks.is_empty() {
        return Ok(EvidenceTrace {
            node: v,
            hops,
            gamma_eff,
            gamma_mass,
            hop_vectors,
            context,
            query_source,
            query,
            chunks,
            chunk_scores: Vec::new(),
            chunk_pre: Vec::new(),
            chunk_weights: Vec::new(),
            chunk_kept: Vec::new(),
            t_tilde,
            empty: true,
        });
    }
    let scale = (d as f64).sqrt();
    let chunk_scores: Vec<f64> = chunks
        .iter()
        .map(|&(u, r)| query.dot(&inputs.bank.node(u).embeddings[r]) / scale)
        .collect();
    let chunk_pre = cfg.sparse.apply(&chunk_scores);
    let (chunk_weights, chunk_kept) = truncate_with(&chunk_pre, cfg.budgets.b_tok, cfg.renormalize)?;
    for (&(u, r), &w) in chunks.iter().zip(&chunk_weights) {
        if w > 0.0 {
            t_tilde.scaled_add(w, &inputs.bank.node(u).embeddings[r]);
        }
    }
    Ok(EvidenceTrace {
        node: v,
        hops,
        gamma_eff,
        gamma_mass,
        hop_vectors,
        context,
        query_source,
        query,
        chunks,
        chunk_scores,
        chunk_pre,
        chunk_weights,
        chunk_kept,
        t_tilde,
        empty: false,
    })
}

/// Accumulates `∂L/∂params` given `∂L/∂t̃_v`, with all discrete selections held fixed.
pub fn evidence_backward(
    trace: &EvidenceTrace,
    inputs: EvidenceInputs<'_>,
    params: &SelectionParams,
    cfg: &EvidenceConfig,
    grad_t: ArrayView1<'_, f64>,
    grads: &mut SelectionParams,
) {
    if trace.empty {
        return;
    }
    let d = params.dim();
    let scale = (d as f64).sqrt();
    let bank = inputs.bank;

    // t̃ = Σ π e
    let g_pi: Vec<f64> = trace.chunks.iter().map(|&(u, r)| grad_t.dot(&bank.node(u).embeddings[r])).collect();
    let g_pre = truncate_vjp(&trace.chunk_pre, &trace.chunk_kept, &g_pi);
    let g_scores = cfg.sparse.vjp(&trace.chunk_pre, &g_pre);
    let mut g_query = Array1::<f64>::zeros(d);
    for (&(u, r), &gs) in trace.chunks.iter().zip(&g_scores) {
        if gs != 0.0 {
            g_query.scaled_add(gs / scale, &bank.node(u).embeddings[r]);
        }
    }
    // q = W_s m
    outer_add(&mut grads.w_s, &g_query, &trace.query_source);
    let g_context = params.w_s.t().dot(&g_query) * (1.0 - cfg.mix);

    // c = Σ γ̂_ℓ h_ℓ
    if trace.gamma_mass > 0.0 {
        let gc_c = g_context.dot(&trace.context);
        for l in 0..3 {
            if !trace.hops[l].is_empty() {
                grads.gamma[l] += (g_context.dot(&trace.hop_vectors[l]) - gc_c) / trace.gamma_mass;
            }
        }
    }
    let qg = params.w_q.dot(&inputs.g.row(trace.node));
    let mut g_qg = Array1::<f64>::zeros(d);
    let mut t_weighted = Array1::<f64>::zeros(d);
    for l in 1..3 {
        let hop = &trace.hops[l];
        if hop.is_empty() || trace.gamma_eff[l] == 0.0 {
            continue;
        }
        let g_alpha: Vec<f64> = hop.candidates.iter().map(|&u| trace.gamma_eff[l] * g_context.dot(bank.pooled(u))).collect();
        let g_pre = truncate_vjp(&hop.pre, &hop.kept, &g_alpha);
        let g_s = cfg.sparse.vjp(&hop.pre, &g_pre);
        for (&u, &gs) in hop.candidates.iter().zip(&g_s) {
            if gs != 0.0 {
                let t_u = bank.pooled(u);
                g_qg.scaled_add(gs / scale, &params.w_k.dot(t_u));
                t_weighted.scaled_add(gs / scale, t_u);
            }
        }
    }
    // s_u = qgᵀ W_k t_u / √d
    outer_add(&mut grads.w_q, &g_qg, &inputs.g.row(trace.node).to_owned());
    outer_add(&mut grads.w_k, &qg, &t_weighted);
}

fn outer_add(m: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai != 0.0 {
            m.row_mut(i).scaled_add(ai, b);
        }
    }
}
