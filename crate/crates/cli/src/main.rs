use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tagcond_core::error::{Error, Result};
use tagcond_core::experiment::{
    ablate_refresh, faithfulness, run_experiment, run_theory_checks, seed_dir, DataSource, ExperimentConfig, Summary,
    DEFAULT_VARIANTS,
};
use tagcond_core::fed::RefreshPolicy;
use tagcond_core::graph::write_tag;

#[derive(Parser)]
#[command(name = "tagcond", version, about = "Federated condensation of text-attributed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `bench-cli.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train for every seed and write round reports, packs, checkpoints and a summary.
    Run(Common),
    /// Write the configured synthetic graph(s) as node/edge files.
    GenerateData(Common),
    /// Randomized checks of selection, truncation, quotas, descent and gradients.
    TheoryCheck(Common),
    /// Compare refresh policies over shared seeds.
    AblateRefresh {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset, e.g. `full,static,random_core`.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
    },
    /// Masked-text sufficiency/comprehensiveness tests on trained checkpoints.
    Faithfulness {
        #[command(flatten)]
        common: Common,
        /// Directory holding `seed-N/checkpoint`; defaults to the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Print the summary of a finished run and rewrite its CSV.
    Report(Common),
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.run.seeds = vec![s];
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.run.out_dir.clone());
    cfg.run.out_dir = out.clone();
    Ok((cfg, out))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn cmd_run(common: &Common) -> Result<ExitCode> {
    let (cfg, out) = load(common)?;
    let summary = run_experiment(&cfg, &out)?;
    print_summary(&summary, common.quiet);
    Ok(ExitCode::SUCCESS)
}

fn print_summary(s: &Summary, quiet: bool) {
    if quiet {
        return;
    }
    println!(
        "accuracy {:.4} ± {:.4}  macro-F1 {:.4} ± {:.4}  over {} seed(s)",
        s.accuracy.mean, s.accuracy.std, s.macro_f1.mean, s.macro_f1.std, s.accuracy.n
    );
    println!(
        "tokens per core node {:.2}  reduction vs unbudgeted {:.2}%",
        s.tokens_per_core_node.mean,
        100.0 * s.token_reduction.mean
    );
}

fn cmd_generate(common: &Common) -> Result<ExitCode> {
    let (cfg, out) = load(common)?;
    if !matches!(cfg.graph.data, DataSource::Synthetic { .. }) {
        return Err(Error::Config("generate-data needs a synthetic data source".into()));
    }
    for &seed in &cfg.run.seeds {
        let tag = cfg.load_dataset(seed)?;
        let dir = out.join(format!("data-seed-{seed}"));
        fs::create_dir_all(&dir)?;
        write_tag(&tag, &dir.join("nodes.jsonl"), &dir.join("edges.txt"))?;
        if !common.quiet {
            println!("{}: {} nodes, {} edges", dir.display(), tag.node_count(), tag.edge_count());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_theory(common: &Common) -> Result<ExitCode> {
    let (cfg, out) = load(common)?;
    let report = run_theory_checks(&cfg)?;
    write_json(&out.join("theory.json"), &report)?;
    for c in &report.checks {
        if !common.quiet {
            let slack = c.worst_slack.map_or("-".to_string(), |s| format!("{s:.3e}"));
            println!(
                "{:<4} {:<22} instances {:>8}  failures {:>4}  worst slack {}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.instances,
                c.failures,
                slack
            );
        }
    }
    if report.passed() {
        return Ok(ExitCode::SUCCESS);
    }
    let failing: Vec<_> = report.checks.iter().filter(|c| !c.passed()).collect();
    let path = out.join("theory-failures.json");
    write_json(&path, &failing)?;
    eprintln!("{} check(s) failed; replay instances in {}", failing.len(), path.display());
    Ok(ExitCode::from(3))
}

fn parse_policy(s: &str) -> Result<RefreshPolicy> {
    DEFAULT_VARIANTS
        .iter()
        .copied()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown refresh variant `{s}`")))
}

fn cmd_ablate(common: &Common, variants: &[String]) -> Result<ExitCode> {
    let (cfg, out) = load(common)?;
    if cfg.run.seeds.len() < 3 && common.seed.is_none() {
        return Err(Error::Config("ablate-refresh needs at least 3 seeds".into()));
    }
    let variants: Vec<RefreshPolicy> = if variants.is_empty() {
        DEFAULT_VARIANTS.to_vec()
    } else {
        variants.iter().map(|v| parse_policy(v)).collect::<Result<_>>()?
    };
    let report = ablate_refresh(&cfg, &variants, |_, _| Ok(()))?;
    write_json(&out.join("ablation.json"), &report)?;
    let mut csv = String::from("variant,seed,accuracy\n");
    for v in &report.variants {
        for (s, a) in report.seeds.iter().zip(&v.accuracies) {
            csv += &format!("{},{s},{a:.6}\n", v.policy.name());
        }
    }
    fs::write(out.join("ablation.csv"), csv)?;
    if !common.quiet {
        print!("{}", report.table());
        println!("round-1 artifacts identical across deterministic variants: {}", report.round1_artifacts_identical);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_faithfulness(common: &Common, checkpoint: Option<&Path>) -> Result<ExitCode> {
    let (cfg, out) = load(common)?;
    let root = checkpoint.map_or_else(|| out.clone(), Path::to_path_buf);
    for &seed in &cfg.run.seeds {
        let dir = seed_dir(&root, seed).join("checkpoint");
        if !dir.exists() {
            return Err(Error::CheckpointMismatch(format!("no checkpoint at {}", dir.display())));
        }
    }
    let report = faithfulness(&cfg, &root)?;
    write_json(&out.join("faithfulness.json"), &report)?;
    if !common.quiet {
        println!("full           {:.4}", report.acc_full);
        println!("sufficiency    {:.4}  random keep    {:.4}", report.acc_sufficiency, report.acc_random_keep);
        println!("comprehensive  {:.4}  random remove  {:.4}", report.acc_comprehensiveness, report.acc_random_remove);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(common: &Common) -> Result<ExitCode> {
    let (_, out) = load(common)?;
    let path = out.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let summary: Summary = serde_json::from_str(&text)?;
    fs::write(out.join("summary.csv"), summary.to_csv())?;
    if !common.quiet {
        println!("{:>6} {:>9} {:>9} {:>10} {:>12}", "seed", "accuracy", "macro_f1", "tokens", "comm_bytes");
        for r in &summary.runs {
            println!(
                "{:>6} {:>9.4} {:>9.4} {:>10.2} {:>12}",
                r.seed, r.accuracy, r.macro_f1, r.tokens_per_core_node, r.comm_bytes
            );
        }
    }
    print_summary(&summary, common.quiet);
    Ok(ExitCode::SUCCESS)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::CheckpointMismatch(_) => 2,
        Error::Invariant(_) | Error::PrivacyViolation(_) | Error::Numerical(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = match &cli.command {
        Command::Run(c) | Command::GenerateData(c) | Command::TheoryCheck(c) | Command::Report(c) => c.quiet,
        Command::AblateRefresh { common, .. } | Command::Faithfulness { common, .. } => common.quiet,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "error" } else { "warn" })).init();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::GenerateData(c) => cmd_generate(c),
        Command::TheoryCheck(c) => cmd_theory(c),
        Command::AblateRefresh { common, variants } => cmd_ablate(common, variants),
        Command::Faithfulness { common, checkpoint } => cmd_faithfulness(common, checkpoint.as_deref()),
        Command::Report(c) => cmd_report(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
