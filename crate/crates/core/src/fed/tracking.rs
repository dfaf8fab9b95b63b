//! Per-round bookkeeping over evidence traces: budgets, bound checks, and
//! drift-versus-selection comparisons between consecutive refreshes.

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::condense::CondensedCore;
use crate::error::Result;
use crate::evidence::truncate::selected_set;
use crate::evidence::{tail_mass, top_b_margin, Budgets, EvidenceConfig, EvidenceTrace};
use crate::text::ChunkEmbeddingBank;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetStats {
    pub core_nodes: usize,
    pub neighbor_total: usize,
    pub chunk_nnz_total: usize,
    pub tokens_total: usize,
    pub budget_violations: usize,
    pub weight_sum_violations: usize,
    pub truncation_checks: usize,
    pub truncation_violations: usize,
}

impl BudgetStats {
    pub fn merge(&mut self, o: &BudgetStats) {
        self.core_nodes += o.core_nodes;
        self.neighbor_total += o.neighbor_total;
        self.chunk_nnz_total += o.chunk_nnz_total;
        self.tokens_total += o.tokens_total;
        self.budget_violations += o.budget_violations;
        self.weight_sum_violations += o.weight_sum_violations;
        self.truncation_checks += o.truncation_checks;
        self.truncation_violations += o.truncation_violations;
    }
}

fn sums_to_one(w: &[f64]) -> bool {
    w.is_empty() || (w.iter().sum::<f64>() - 1.0).abs() <= 1e-6
}

pub fn budget_stats(traces: &[EvidenceTrace], bank: &ChunkEmbeddingBank, budgets: &Budgets) -> BudgetStats {
    let mut s = BudgetStats {
        core_nodes: traces.len(),
        ..BudgetStats::default()
    };
    for t in traces {
        for (l, hop) in t.hops.iter().enumerate() {
            let n = hop.selected().count();
            s.neighbor_total += n;
            if n > budgets.hop(l) {
                s.budget_violations += 1;
            }
            if !sums_to_one(&hop.weights) {
                s.weight_sum_violations += 1;
            }
        }
        let nnz = t.chunk_nnz();
        s.chunk_nnz_total += nnz;
        if nnz > budgets.b_tok {
            s.budget_violations += 1;
        }
        if !sums_to_one(&t.chunk_weights) {
            s.weight_sum_violations += 1;
        }
        s.tokens_total += t
            .selected_chunks()
            .map(|((u, r), _)| bank.node(u).chunks[r].tokens)
            .sum::<usize>();
        if !t.empty {
            // ‖Σ p e − Σ π e‖ ≤ 2·δ_B(p), chunk embeddings have unit norm
            let d = bank.dim();
            let mut diff = Array1::<f64>::zeros(d);
            for (&(u, r), (&p, &q)) in t.chunks.iter().zip(t.chunk_pre.iter().zip(&t.chunk_weights)) {
                diff.scaled_add(p - q, &bank.node(u).embeddings[r]);
            }
            let bound = 2.0 * tail_mass(&t.chunk_pre, budgets.b_tok);
            s.truncation_checks += 1;
            if diff.dot(&diff).sqrt() > bound + 1e-9 {
                s.truncation_violations += 1;
            }
        }
    }
    s
}

/// Tokens of every chunk of every node within two hops, no budgets.
pub fn unbudgeted_tokens(core: &[usize], hops: &[[Vec<usize>; 3]], bank: &ChunkEmbeddingBank) -> usize {
    core.iter()
        .map(|&v| {
            hops[v]
                .iter()
                .flatten()
                .map(|&u| bank.node(u).chunks.iter().map(|c| c.tokens).sum::<usize>())
                .sum::<usize>()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StabilityStats {
    /// Core nodes whose selected neighbors or chunks differ from the previous refresh.
    pub refresh_changes: usize,
    /// Score vectors compared on identical candidate lists.
    pub margin_checks: usize,
    pub set_changes: usize,
    /// Set changes although the score shift stayed below half the margin.
    pub margin_violations: usize,
    pub max_score_shift: f64,
    /// Smallest positive Δ_B among compared score vectors.
    pub min_margin: Option<f64>,
}

impl StabilityStats {
    pub fn merge(&mut self, o: &StabilityStats) {
        self.refresh_changes += o.refresh_changes;
        self.margin_checks += o.margin_checks;
        self.set_changes += o.set_changes;
        self.margin_violations += o.margin_violations;
        self.max_score_shift = self.max_score_shift.max(o.max_score_shift);
        self.min_margin = min_opt(self.min_margin, o.min_margin);
    }
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn selection_signature(t: &EvidenceTrace) -> (Vec<Vec<usize>>, Vec<(usize, usize)>) {
    (
        t.hops.iter().map(|h| h.selected().map(|(u, _)| u).collect()).collect(),
        t.selected_chunks().map(|(c, _)| c).collect(),
    )
}

pub fn compare_refreshes(prev: &[EvidenceTrace], cur: &[EvidenceTrace], cfg: &EvidenceConfig) -> Result<StabilityStats> {
    let mut s = StabilityStats::default();
    for c in cur {
        let Some(p) = prev.iter().find(|p| p.node == c.node) else {
            continue;
        };
        if selection_signature(p) != selection_signature(c) {
            s.refresh_changes += 1;
        }
        let mut levels: Vec<(&[f64], &[f64], usize)> = Vec::new();
        for l in 1..3 {
            if p.hops[l].candidates == c.hops[l].candidates && !c.hops[l].is_empty() {
                levels.push((&p.hops[l].scores, &c.hops[l].scores, cfg.budgets.hop(l)));
            }
        }
        if p.chunks == c.chunks && !c.chunks.is_empty() {
            levels.push((&p.chunk_scores, &c.chunk_scores, cfg.budgets.b_tok));
        }
        for (old, new, b) in levels {
            let shift = old.iter().zip(new).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            s.max_score_shift = s.max_score_shift.max(shift);
            let margin = top_b_margin(old, b);
            if !margin.is_finite() {
                continue;
            }
            s.margin_checks += 1;
            if margin > 0.0 {
                s.min_margin = min_opt(s.min_margin, Some(margin));
            }
            if selected_set(old, b, cfg.sparse)? != selected_set(new, b, cfg.sparse)? {
                s.set_changes += 1;
                if shift < margin / 2.0 {
                    s.margin_violations += 1;
                }
            }
        }
    }
    Ok(s)
}

/// Hash of the core and its selected evidence, for byte-identity checks.
pub fn artifact_hash(core: &CondensedCore, traces: &[EvidenceTrace]) -> String {
    let mut h = Sha256::new();
    for &v in &core.node_ids {
        h.update((v as u64).to_le_bytes());
    }
    for t in traces {
        for hop in &t.hops {
            for (u, w) in hop.selected() {
                h.update((u as u64).to_le_bytes());
                h.update(w.to_le_bytes());
            }
        }
        for ((u, r), w) in t.selected_chunks() {
            h.update((u as u64).to_le_bytes());
            h.update((r as u64).to_le_bytes());
            h.update(w.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
