//! Experiment drivers behind the command-line tool.

pub mod ablate;
pub mod config;
pub mod faithfulness;
pub mod run;
pub mod theory;

pub use ablate::{ablate_refresh, AblationReport, PairedDifference, VariantResult, DEFAULT_VARIANTS};
pub use config::{DataSource, ExperimentConfig};
pub use faithfulness::{faithfulness, faithfulness_for_model, faithfulness_for_state, FaithfulnessReport, FaithfulnessSeed};
pub use run::{build_state, run_experiment, run_seed, seed_dir, write_jsonl, MeanStd, SeedRun, SeedSummary, Summary};
pub use theory::{run_theory_checks, CheckReport, TheoryReport};
