//! Refresh-policy ablation over shared seeds.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{run_seed, MeanStd, SeedRun};
use crate::error::Result;
use crate::fed::RefreshPolicy;

pub const DEFAULT_VARIANTS: [RefreshPolicy; 6] = [
    RefreshPolicy::Full,
    RefreshPolicy::Static,
    RefreshPolicy::CoreOnly,
    RefreshPolicy::TextOnly,
    RefreshPolicy::RandomCore,
    RefreshPolicy::RandomRedraw,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub policy: RefreshPolicy,
    pub accuracies: Vec<f64>,
    pub accuracy: MeanStd,
    pub tokens_per_core_node: MeanStd,
    pub first_round_artifacts: Vec<String>,
    pub condensation_recomputations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub baseline: RefreshPolicy,
    /// Per seed, full minus baseline.
    pub differences: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub variants: Vec<VariantResult>,
    pub paired_vs_full: Vec<PairedDifference>,
    /// Deterministic-core variants share their round-1 core and evidence per seed.
    pub round1_artifacts_identical: bool,
}

impl AblationReport {
    pub fn variant(&self, p: RefreshPolicy) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.policy == p)
    }

    pub fn paired(&self, p: RefreshPolicy) -> Option<&PairedDifference> {
        self.paired_vs_full.iter().find(|d| d.baseline == p)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<14} {:>9} {:>8} {:>11}\n", "variant", "mean_acc", "std", "full-minus");
        for v in &self.variants {
            let gap = self.paired(v.policy).map_or("-".to_string(), |d| format!("{:+.4}", d.mean));
            s += &format!("{:<14} {:>9.4} {:>8.4} {:>11}\n", v.policy.name(), v.accuracy.mean, v.accuracy.std, gap);
        }
        s
    }
}

/// Runs each variant on every seed. `hook` sees every finished run, e.g. to keep
/// the full-policy models for a later faithfulness pass.
pub fn ablate_refresh(
    cfg: &ExperimentConfig,
    variants: &[RefreshPolicy],
    mut hook: impl FnMut(RefreshPolicy, &SeedRun) -> Result<()>,
) -> Result<AblationReport> {
    let seeds = cfg.run.seeds.clone();
    // only the final accuracy is compared
    let mut cfg = cfg.clone();
    cfg.fed.eval_every = cfg.fed.rounds;
    let cfg = &cfg;
    let mut results = Vec::new();
    for &policy in variants {
        let mut accs = Vec::new();
        let mut tokens = Vec::new();
        let mut hashes = Vec::new();
        let mut recomputations = Vec::new();
        for &seed in &seeds {
            let run = run_seed(cfg, seed, Some(policy))?;
            accs.push(run.metrics.accuracy);
            tokens.push(run.tokens_per_core_node());
            hashes.push(
                run.state
                    .clients
                    .iter()
                    .map(|c| c.first_artifact_hash.clone().unwrap_or_default())
                    .collect::<Vec<_>>()
                    .join(":"),
            );
            recomputations.push(run.state.clients.iter().map(|c| c.recomputations).sum());
            hook(policy, &run)?;
            log::info!("ablation {} seed {seed}: {:.4}", policy.name(), run.metrics.accuracy);
        }
        results.push(VariantResult {
            policy,
            accuracy: MeanStd::of(&accs),
            accuracies: accs,
            tokens_per_core_node: MeanStd::of(&tokens),
            first_round_artifacts: hashes,
            condensation_recomputations: recomputations,
        });
    }
    let full = results.iter().find(|v| v.policy == RefreshPolicy::Full).cloned();
    let paired_vs_full = match &full {
        Some(f) => results
            .iter()
            .filter(|v| v.policy != RefreshPolicy::Full)
            .map(|v| {
                let differences: Vec<f64> = f.accuracies.iter().zip(&v.accuracies).map(|(a, b)| a - b).collect();
                let m = MeanStd::of(&differences);
                PairedDifference {
                    baseline: v.policy,
                    differences,
                    mean: m.mean,
                    std: m.std,
                }
            })
            .collect(),
        None => Vec::new(),
    };
    let deterministic: Vec<&VariantResult> = results.iter().filter(|v| !v.policy.is_random()).collect();
    let round1_artifacts_identical = deterministic
        .windows(2)
        .all(|w| w[0].first_round_artifacts == w[1].first_round_artifacts);
    Ok(AblationReport {
        seeds,
        variants: results,
        paired_vs_full,
        round1_artifacts_identical,
    })
}
