//! Sufficiency and comprehensiveness of selected evidence, against random
//! chunk sets of matched size drawn from the same two-hop neighborhood.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{build_state, seed_dir, MeanStd};
use crate::error::{Error, Result};
use crate::evidence::EvidenceConfig;
use crate::fed::{load_checkpoint, ClientState, FedState, GlobalModel};
use crate::gnn::{backbone_view, predict_nodes, GraphContext};
use crate::graph::{Split, TextAttributedGraph};
use crate::rng;
use crate::text::{build_bank, ChunkEmbeddingBank, Encoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Full,
    Sufficiency,
    Comprehensiveness,
    RandomKeep,
    RandomRemove,
}

const CONDITIONS: [Condition; 5] = [
    Condition::Full,
    Condition::Sufficiency,
    Condition::Comprehensiveness,
    Condition::RandomKeep,
    Condition::RandomRemove,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessSeed {
    pub seed: u64,
    pub acc_full: f64,
    pub acc_sufficiency: f64,
    pub acc_comprehensiveness: f64,
    pub acc_random_keep: f64,
    pub acc_random_remove: f64,
    pub test_nodes: usize,
    pub mean_selected_chunks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub acc_full: f64,
    pub acc_sufficiency: f64,
    pub acc_comprehensiveness: f64,
    pub acc_random_keep: f64,
    pub acc_random_remove: f64,
    /// Per seed, sufficiency minus random keep.
    pub sufficiency_gap: MeanStd,
    /// Per seed, random remove minus comprehensiveness.
    pub comprehensiveness_gap: MeanStd,
    pub per_seed: Vec<FaithfulnessSeed>,
}

type ChunkId = (usize, usize);

/// Texts with, for every node in `scope`, only the chunks accepted by `keep`.
fn masked_texts(graph: &TextAttributedGraph, bank: &ChunkEmbeddingBank, scope: &BTreeSet<usize>, keep: impl Fn(ChunkId) -> bool) -> Vec<String> {
    (0..graph.node_count())
        .map(|u| {
            if !scope.contains(&u) {
                return graph.text(u).to_string();
            }
            let text = graph.text(u);
            bank.node(u)
                .chunks
                .iter()
                .enumerate()
                .filter(|&(r, _)| keep((u, r)))
                .map(|(_, c)| &text[c.start..c.end])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

fn predict_one(graph: &TextAttributedGraph, window: usize, encoder: &Encoder, model: &GlobalModel, cfg: &EvidenceConfig, v: usize) -> Result<usize> {
    let bank = build_bank(graph, window, encoder)?;
    let ctx = GraphContext::new(graph, &bank);
    let view = backbone_view(&ctx, &model.gcn)?;
    let p = predict_nodes(&ctx, &bank, &view, &model.selection, &model.fusion, cfg, &[v])?;
    Ok(p.predicted_class(0))
}

/// Correct-prediction counts per condition for one client's test nodes.
fn client_counts(
    client: &ClientState,
    model: &GlobalModel,
    cfg: &EvidenceConfig,
    encoder: &Encoder,
    seed: u64,
) -> Result<([usize; 5], usize, usize)> {
    let graph = &client.graph;
    let bank = &client.bank;
    let window = bank.window();
    let nodes: Vec<usize> = graph.nodes_in(Split::Test).into_iter().filter(|&v| graph.label(v).is_some()).collect();
    let mut correct = [0usize; 5];
    let mut selected_total = 0;
    if nodes.is_empty() {
        return Ok((correct, 0, 0));
    }
    let view = backbone_view(&client.ctx, &model.gcn)?;
    let base = predict_nodes(&client.ctx, bank, &view, &model.selection, &model.fusion, cfg, &nodes)?;
    for (i, &v) in nodes.iter().enumerate() {
        let truth = graph.label(v).unwrap();
        let selected: BTreeSet<ChunkId> = base.traces[i].selected_chunks().map(|(c, _)| c).collect();
        selected_total += selected.len();
        let scope: BTreeSet<usize> = client.ctx.hops[v].iter().flatten().copied().collect();
        let pool: Vec<ChunkId> = scope.iter().flat_map(|&u| (0..bank.chunk_count(u)).map(move |r| (u, r))).collect();
        let mut r = rng::stream(seed, &format!("faithfulness.{}.{v}.random", client.id));
        let random: BTreeSet<ChunkId> = sample(&mut r, pool.len(), selected.len().min(pool.len()))
            .into_iter()
            .map(|j| pool[j])
            .collect();
        for (slot, cond) in CONDITIONS.iter().enumerate() {
            let pred = match cond {
                Condition::Full => base.predicted_class(i),
                _ => {
                    let texts = match cond {
                        Condition::Sufficiency => masked_texts(graph, bank, &scope, |c| selected.contains(&c)),
                        Condition::Comprehensiveness => masked_texts(graph, bank, &scope, |c| !selected.contains(&c)),
                        Condition::RandomKeep => masked_texts(graph, bank, &scope, |c| random.contains(&c)),
                        _ => masked_texts(graph, bank, &scope, |c| !random.contains(&c)),
                    };
                    predict_one(&graph.with_texts(texts)?, window, encoder, model, cfg, v)?
                }
            };
            correct[slot] += usize::from(pred == truth);
        }
    }
    Ok((correct, nodes.len(), selected_total))
}

pub fn faithfulness_for_state(state: &FedState, encoder: &Encoder, seed: u64) -> Result<FaithfulnessSeed> {
    faithfulness_for_model(state, &state.model, encoder, seed)
}

pub fn faithfulness_for_model(state: &FedState, model: &GlobalModel, encoder: &Encoder, seed: u64) -> Result<FaithfulnessSeed> {
    let cfg = state.cfg.evidence;
    let mut correct = [0usize; 5];
    let mut total = 0;
    let mut selected = 0;
    for c in &state.clients {
        let (k, n, s) = client_counts(c, model, &cfg, encoder, seed)?;
        for j in 0..5 {
            correct[j] += k[j];
        }
        total += n;
        selected += s;
    }
    if total == 0 {
        return Err(Error::Validation("no labeled test nodes for faithfulness".into()));
    }
    let acc = |j: usize| correct[j] as f64 / total as f64;
    Ok(FaithfulnessSeed {
        seed,
        acc_full: acc(0),
        acc_sufficiency: acc(1),
        acc_comprehensiveness: acc(2),
        acc_random_keep: acc(3),
        acc_random_remove: acc(4),
        test_nodes: total,
        mean_selected_chunks: selected as f64 / total as f64,
    })
}

pub fn summarize(per_seed: Vec<FaithfulnessSeed>) -> FaithfulnessReport {
    let col = |f: fn(&FaithfulnessSeed) -> f64| MeanStd::of(&per_seed.iter().map(f).collect::<Vec<_>>());
    FaithfulnessReport {
        acc_full: col(|s| s.acc_full).mean,
        acc_sufficiency: col(|s| s.acc_sufficiency).mean,
        acc_comprehensiveness: col(|s| s.acc_comprehensiveness).mean,
        acc_random_keep: col(|s| s.acc_random_keep).mean,
        acc_random_remove: col(|s| s.acc_random_remove).mean,
        sufficiency_gap: col(|s| s.acc_sufficiency - s.acc_random_keep),
        comprehensiveness_gap: col(|s| s.acc_random_remove - s.acc_comprehensiveness),
        per_seed,
    }
}

/// Loads `root/seed-N/checkpoint` for every configured seed.
pub fn faithfulness(cfg: &ExperimentConfig, root: &Path) -> Result<FaithfulnessReport> {
    let encoder = cfg.text.encoder.build()?;
    let mut per_seed = Vec::new();
    for &seed in &cfg.run.seeds {
        let state = build_state(cfg, seed, None)?;
        let model = load_checkpoint(&seed_dir(root, seed).join("checkpoint"), &state.model, &state.dataset_fingerprint)?;
        per_seed.push(faithfulness_for_model(&state, &model, &encoder, seed)?);
    }
    Ok(summarize(per_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fed::RoundConfig;
    use crate::graph::{generate_synthetic_tag, SyntheticConfig};
    use crate::text::EncoderConfig;

    fn small_state(texts: Option<&str>, budgets_all: bool) -> (FedState, Encoder) {
        let sc = SyntheticConfig { classes: 2, nodes_per_class: 10, p_in: 0.3, p_out: 0.02, ..SyntheticConfig::default() };
        let mut tag = generate_synthetic_tag(&sc, 3).unwrap();
        if let Some(t) = texts {
            tag = tag.with_texts(vec![t.to_string(); tag.node_count()]).unwrap();
        }
        let enc = EncoderConfig::Hash { dim: 8 }.build().unwrap();
        let mut cfg = RoundConfig { rounds: 1, clients: 1, hidden: 8, ..RoundConfig::default() };
        if budgets_all {
            cfg.evidence.budgets.b1 = 100;
            cfg.evidence.budgets.b2 = 100;
            cfg.evidence.budgets.b_tok = 10_000;
        }
        (FedState::new(&tag, cfg, &enc, 4, 1).unwrap(), enc)
    }

    #[test]
    fn identical_texts_with_unbounded_budgets_mask_nothing() {
        // equal chunk scores give every candidate positive weight
        let (state, enc) = small_state(Some("alpha beta gamma delta"), true);
        let f = faithfulness_for_state(&state, &enc, 0).unwrap();
        assert_eq!(f.acc_sufficiency, f.acc_full);
    }

    #[test]
    fn masking_all_text_matches_zero_text_predictor() {
        let (state, enc) = small_state(Some(""), false);
        let f = faithfulness_for_state(&state, &enc, 0).unwrap();
        assert_eq!(f.mean_selected_chunks, 0.0);
        for a in [f.acc_sufficiency, f.acc_comprehensiveness, f.acc_random_keep, f.acc_random_remove] {
            assert_eq!(a, f.acc_full);
        }
    }

    #[test]
    fn accuracies_are_probabilities_and_deterministic() {
        let (state, enc) = small_state(None, false);
        let a = faithfulness_for_state(&state, &enc, 0).unwrap();
        let b = faithfulness_for_state(&state, &enc, 0).unwrap();
        assert_eq!(a, b);
        for x in [a.acc_full, a.acc_sufficiency, a.acc_comprehensiveness, a.acc_random_keep, a.acc_random_remove] {
            assert!((0.0..=1.0).contains(&x));
        }
    }
}
