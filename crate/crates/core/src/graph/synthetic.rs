//! Stochastic-block-model text-attributed graphs for desk-scale experiments.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tag::{Split, TextAttributedGraph};
use crate::error::{Error, Result};
use crate::rng;

/// Generator parameters. Texts are sequences of short segments; a segment is
/// either topical (dense in class keywords) or filler drawn from a shared
/// vocabulary, so some chunks of a node carry the label signal and others do not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub nodes_per_class: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub keywords_per_class: usize,
    pub filler_words: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub segment_tokens: usize,
    /// Bounds of the per-node probability that a segment is topical.
    pub topical_min: f64,
    pub topical_max: f64,
    /// Fraction of keyword tokens inside a topical segment.
    pub keyword_rate: f64,
    /// Probability that a topical segment uses another class's keywords.
    pub confusion: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            nodes_per_class: 100,
            p_in: 0.08,
            p_out: 0.004,
            keywords_per_class: 12,
            filler_words: 80,
            min_tokens: 40,
            max_tokens: 120,
            segment_tokens: 16,
            topical_min: 0.05,
            topical_max: 0.5,
            keyword_rate: 0.5,
            confusion: 0.25,
        }
    }
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "vo", "zi", "be", "do", "fu", "ga", "hi", "ju", "po", "se",
];

fn word(index: usize) -> String {
    // Three syllables cover 4096 distinct words.
    let mut w = String::with_capacity(6);
    let mut x = index;
    for _ in 0..3 {
        w.push_str(SYLLABLES[x % 16]);
        x /= 16;
    }
    w
}

pub fn keyword(class: usize, j: usize, per_class: usize) -> String {
    word(1 + class * per_class + j)
}

pub fn generate_synthetic_tag(cfg: &SyntheticConfig, seed: u64) -> Result<TextAttributedGraph> {
    if cfg.classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {}", cfg.classes)));
    }
    if !(0.0 <= cfg.p_out && cfg.p_out < cfg.p_in && cfg.p_in <= 1.0) {
        return Err(Error::Config(format!(
            "require 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
            cfg.p_in, cfg.p_out
        )));
    }
    if cfg.min_tokens == 0 || cfg.min_tokens > cfg.max_tokens || cfg.segment_tokens == 0 {
        return Err(Error::Config("invalid token length settings".into()));
    }
    if cfg.classes * cfg.keywords_per_class + cfg.filler_words + 1 > 4096 {
        return Err(Error::Config("vocabulary too large".into()));
    }
    let n = cfg.classes * cfg.nodes_per_class;
    let class_of = |v: usize| v / cfg.nodes_per_class;

    let mut edge_rng = rng::stream(seed, "synthetic.edges");
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let p = if class_of(a) == class_of(b) { cfg.p_in } else { cfg.p_out };
            if edge_rng.gen::<f64>() < p {
                edges.push((a, b));
            }
        }
    }

    let filler_base = 1 + cfg.classes * cfg.keywords_per_class;
    let mut text_rng = rng::stream(seed, "synthetic.text");
    let texts = (0..n)
        .map(|v| {
            let c = class_of(v);
            let len = text_rng.gen_range(cfg.min_tokens..=cfg.max_tokens);
            let topical = text_rng.gen_range(cfg.topical_min..=cfg.topical_max);
            let mut tokens = Vec::with_capacity(len);
            while tokens.len() < len {
                let seg_class = if text_rng.gen::<f64>() < topical {
                    if text_rng.gen::<f64>() < cfg.confusion {
                        let other = text_rng.gen_range(0..cfg.classes - 1);
                        Some(if other >= c { other + 1 } else { other })
                    } else {
                        Some(c)
                    }
                } else {
                    None
                };
                for _ in 0..cfg.segment_tokens.min(len - tokens.len()) {
                    let tok = match seg_class {
                        Some(k) if text_rng.gen::<f64>() < cfg.keyword_rate => {
                            keyword(k, text_rng.gen_range(0..cfg.keywords_per_class), cfg.keywords_per_class)
                        }
                        _ => word(filler_base + text_rng.gen_range(0..cfg.filler_words)),
                    };
                    tokens.push(tok);
                }
            }
            tokens.join(" ")
        })
        .collect();

    let mut split_rng = rng::stream(seed, "synthetic.splits");
    let mut splits = vec![Split::Test; n];
    for c in 0..cfg.classes {
        let mut members: Vec<usize> = (c * cfg.nodes_per_class..(c + 1) * cfg.nodes_per_class).collect();
        members.shuffle(&mut split_rng);
        let n_train = (0.6 * cfg.nodes_per_class as f64).round() as usize;
        let n_val = (0.2 * cfg.nodes_per_class as f64).round() as usize;
        for (i, &v) in members.iter().enumerate() {
            splits[v] = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }

    TextAttributedGraph::new(
        (0..n as u64).collect(),
        edges,
        texts,
        (0..n).map(|v| Some(class_of(v))).collect(),
        splits,
        cfg.classes,
    )
}
