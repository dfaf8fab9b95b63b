//! Multi-seed experiment runs and their on-disk outputs.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::fed::{save_checkpoint, EvalMetrics, FedState, RefreshPolicy, RoundReport};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }
}

pub struct SeedRun {
    pub seed: u64,
    pub reports: Vec<RoundReport>,
    pub metrics: EvalMetrics,
    pub state: FedState,
}

impl SeedRun {
    pub fn tokens_per_core_node(&self) -> f64 {
        mean_of(self.reports.iter().map(|r| r.tokens_per_core_node))
    }

    pub fn unbudgeted_tokens_per_core_node(&self) -> f64 {
        mean_of(self.reports.iter().map(|r| r.unbudgeted_tokens_per_core_node))
    }
}

fn mean_of(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    MeanStd::of(&v).mean
}

pub fn build_state(cfg: &ExperimentConfig, seed: u64, policy: Option<RefreshPolicy>) -> Result<FedState> {
    let tag = cfg.load_dataset(seed)?;
    let mut rc = cfg.round_config();
    if let Some(p) = policy {
        rc.policy = p;
    }
    let encoder = cfg.text.encoder.build()?;
    FedState::new(&tag, rc, &encoder, cfg.text.window, seed)
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64, policy: Option<RefreshPolicy>) -> Result<SeedRun> {
    let mut state = build_state(cfg, seed, policy)?;
    let reports = state.run()?;
    let metrics = state.evaluate()?;
    log::info!("seed {seed}: accuracy {:.4} macro-F1 {:.4}", metrics.accuracy, metrics.macro_f1);
    Ok(SeedRun {
        seed,
        reports,
        metrics,
        state,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub tokens_per_core_node: f64,
    pub unbudgeted_tokens_per_core_node: f64,
    pub comm_bytes: usize,
    pub refresh_changes: usize,
    pub budget_violations: usize,
}

impl SeedSummary {
    pub fn of(run: &SeedRun) -> Self {
        Self {
            seed: run.seed,
            accuracy: run.metrics.accuracy,
            macro_f1: run.metrics.macro_f1,
            tokens_per_core_node: run.tokens_per_core_node(),
            unbudgeted_tokens_per_core_node: run.unbudgeted_tokens_per_core_node(),
            comm_bytes: run.state.ledger.total_bytes(),
            refresh_changes: run.reports.iter().map(|r| r.refresh_changes).sum(),
            budget_violations: run.reports.iter().map(|r| r.budget_violations).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: Vec<SeedSummary>,
    pub accuracy: MeanStd,
    pub macro_f1: MeanStd,
    pub tokens_per_core_node: MeanStd,
    /// `1 − budgeted / unbudgeted` tokens per core node.
    pub token_reduction: MeanStd,
    pub config: String,
}

impl Summary {
    pub fn new(runs: Vec<SeedSummary>, cfg: &ExperimentConfig) -> Self {
        let col = |f: fn(&SeedSummary) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
        Self {
            accuracy: col(|r| r.accuracy),
            macro_f1: col(|r| r.macro_f1),
            tokens_per_core_node: col(|r| r.tokens_per_core_node),
            token_reduction: col(|r| {
                if r.unbudgeted_tokens_per_core_node > 0.0 {
                    1.0 - r.tokens_per_core_node / r.unbudgeted_tokens_per_core_node
                } else {
                    0.0
                }
            }),
            config: cfg.to_toml(),
            runs,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("seed,accuracy,macro_f1,tokens_per_core_node,unbudgeted_tokens_per_core_node,comm_bytes,refresh_changes\n");
        for r in &self.runs {
            s += &format!(
                "{},{:.6},{:.6},{:.4},{:.4},{},{}\n",
                r.seed, r.accuracy, r.macro_f1, r.tokens_per_core_node, r.unbudgeted_tokens_per_core_node, r.comm_bytes, r.refresh_changes
            );
        }
        s
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Round reports, final packs and a checkpoint for one seed, under `dir`.
pub fn write_seed_outputs(run: &SeedRun, dir: &Path, write_packs: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_jsonl(&dir.join("rounds.jsonl"), &run.reports)?;
    if write_packs {
        let packs: Vec<_> = run.state.clients.iter().flat_map(|c| c.packs.iter().cloned()).collect();
        write_jsonl(&dir.join("packs.jsonl"), &packs)?;
    }
    fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&run.metrics)?)?;
    save_checkpoint(&run.state.model, &run.state.dataset_fingerprint, &dir.join("checkpoint"))
}

pub fn seed_dir(out: &Path, seed: u64) -> std::path::PathBuf {
    out.join(format!("seed-{seed}"))
}

/// Runs every configured seed and writes all outputs under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Summary> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.resolved.toml"), cfg.to_toml())?;
    let mut runs = Vec::new();
    for &seed in &cfg.run.seeds {
        let run = run_seed(cfg, seed, None)?;
        write_seed_outputs(&run, &seed_dir(out, seed), cfg.run.write_packs)?;
        runs.push(SeedSummary::of(&run));
    }
    let summary = Summary::new(runs, cfg);
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    fs::write(out.join("summary.csv"), summary.to_csv())?;
    Ok(summary)
}
