//! Experiment configuration: one TOML table per module, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{Budgets, EvidenceConfig, SparseMap};
use crate::fed::{Faults, RefreshPolicy, RoundConfig};
use crate::graph::{load_tag, generate_synthetic_tag, PartitionMethod, SyntheticConfig, TextAttributedGraph};
use crate::text::EncoderConfig;
use crate::topo::IstaConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        #[serde(default)]
        params: SyntheticConfig,
        /// Fixed generator seed; when absent each run seed generates its own graph.
        #[serde(default)]
        seed: Option<u64>,
    },
    Files {
        nodes: PathBuf,
        edges: PathBuf,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            params: SyntheticConfig::default(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub data: DataSource,
    pub partition: PartitionMethod,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            partition: PartitionMethod::Louvain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextSection {
    pub window: usize,
    pub encoder: EncoderConfig,
}

impl Default for TextSection {
    fn default() -> Self {
        Self {
            window: 32,
            encoder: EncoderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CondenseSection {
    pub ratio: f64,
    pub tau: f64,
    pub prototypes: usize,
}

impl Default for CondenseSection {
    fn default() -> Self {
        let r = RoundConfig::default();
        Self {
            ratio: r.ratio,
            tau: r.tau,
            prototypes: r.prototypes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvidenceSection {
    pub b1: usize,
    pub b2: usize,
    pub b_tok: usize,
    pub two_hop_prefilter: Option<usize>,
    pub sparse_map: SparseMap,
    pub mix: f64,
}

impl Default for EvidenceSection {
    fn default() -> Self {
        let e = EvidenceConfig::default();
        Self {
            b1: e.budgets.b1,
            b2: e.budgets.b2,
            b_tok: e.budgets.b_tok,
            two_hop_prefilter: e.budgets.two_hop_prefilter,
            sparse_map: e.sparse,
            mix: e.mix,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopoSection {
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda3: f64,
    pub eta: Option<f64>,
    pub iterations: usize,
    pub q: usize,
    pub k: usize,
}

impl Default for TopoSection {
    fn default() -> Self {
        let i = IstaConfig::default();
        Self {
            alpha: i.alpha,
            lambda1: i.lambda1,
            lambda3: i.lambda3,
            eta: i.eta,
            iterations: i.iterations,
            q: 3,
            k: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnSection {
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
}

impl Default for GnnSection {
    fn default() -> Self {
        let r = RoundConfig::default();
        Self {
            hidden: r.hidden,
            lr: r.lr,
            weight_decay: r.weight_decay,
            dropout: r.dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FedSection {
    pub rounds: usize,
    pub clients: usize,
    pub participation: f64,
    pub local_epochs: usize,
    pub node_condense_period: usize,
    pub refresh_policy: RefreshPolicy,
    pub fusion_lr: f64,
    pub lambda_align: f64,
    pub privacy_epsilon: Option<f64>,
    pub eval_every: usize,
    pub faults: Faults,
}

impl Default for FedSection {
    fn default() -> Self {
        let r = RoundConfig::default();
        Self {
            rounds: r.rounds,
            clients: r.clients,
            participation: r.participation,
            local_epochs: r.local_epochs,
            node_condense_period: r.period,
            refresh_policy: r.policy,
            fusion_lr: r.fusion_lr,
            lambda_align: r.lambda_align,
            privacy_epsilon: r.privacy_epsilon,
            eval_every: r.eval_every,
            faults: r.faults,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Write evidence packs and summaries of the final round.
    pub write_packs: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            out_dir: PathBuf::from("out"),
            write_packs: true,
        }
    }
}

/// Theory-check instance counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySection {
    pub seed: u64,
    pub sparsemax_vectors: usize,
    pub sparsemax_max_len: usize,
    pub truncation_instances: usize,
    pub truncation_dim: usize,
    pub stability_vectors: usize,
    pub stability_trials: usize,
    pub quota_max_classes: usize,
    pub quota_max_count: usize,
    pub ista_instances: usize,
    pub gradient_instances: usize,
}

impl Default for TheorySection {
    fn default() -> Self {
        Self {
            seed: 0,
            sparsemax_vectors: 500,
            sparsemax_max_len: 6,
            truncation_instances: 1000,
            truncation_dim: 16,
            stability_vectors: 200,
            stability_trials: 50,
            quota_max_classes: 5,
            quota_max_count: 8,
            ista_instances: 100,
            gradient_instances: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "graph-core")]
    pub graph: GraphSection,
    #[serde(rename = "text-bank")]
    pub text: TextSection,
    #[serde(rename = "node-condense")]
    pub condense: CondenseSection,
    pub evidence: EvidenceSection,
    #[serde(rename = "topo-recon")]
    pub topo: TopoSection,
    #[serde(rename = "gnn-backbone")]
    pub gnn: GnnSection,
    #[serde(rename = "fed-sim")]
    pub fed: FedSection,
    #[serde(rename = "bench-cli")]
    pub run: RunSection,
    #[serde(rename = "theory-check")]
    pub theory: TheorySection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a file; relative data paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Files { nodes, edges } = &mut self.graph.data {
            fix(nodes);
            fix(edges);
        }
        if let EncoderConfig::Precomputed { path, .. } = &mut self.text.encoder {
            fix(path);
        }
        fix(&mut self.run.out_dir);
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.text.window == 0 {
            return Err(Error::Config("chunk window must be positive".into()));
        }
        if self.gnn.hidden != self.text.encoder.dim() {
            return Err(Error::Config(format!(
                "gnn-backbone.hidden ({}) must equal the encoder dim ({})",
                self.gnn.hidden,
                self.text.encoder.dim()
            )));
        }
        self.round_config().validate()
    }

    /// The full resolved configuration, defaults expanded.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn round_config(&self) -> RoundConfig {
        RoundConfig {
            rounds: self.fed.rounds,
            clients: self.fed.clients,
            participation: self.fed.participation,
            local_epochs: self.fed.local_epochs,
            period: self.fed.node_condense_period,
            policy: self.fed.refresh_policy,
            partition: self.graph.partition,
            ratio: self.condense.ratio,
            tau: self.condense.tau,
            prototypes: self.condense.prototypes,
            evidence: self.evidence_config(),
            ista: IstaConfig {
                alpha: self.topo.alpha,
                lambda1: self.topo.lambda1,
                lambda3: self.topo.lambda3,
                eta: self.topo.eta,
                iterations: self.topo.iterations,
            },
            q: self.topo.q,
            k: self.topo.k,
            hidden: self.gnn.hidden,
            lr: self.gnn.lr,
            weight_decay: self.gnn.weight_decay,
            dropout: self.gnn.dropout,
            fusion_lr: self.fed.fusion_lr,
            lambda_align: self.fed.lambda_align,
            privacy_epsilon: self.fed.privacy_epsilon,
            eval_every: self.fed.eval_every,
            faults: self.fed.faults,
        }
    }

    pub fn evidence_config(&self) -> EvidenceConfig {
        EvidenceConfig {
            budgets: Budgets {
                b1: self.evidence.b1,
                b2: self.evidence.b2,
                b_tok: self.evidence.b_tok,
                two_hop_prefilter: self.evidence.two_hop_prefilter,
            },
            sparse: self.evidence.sparse_map,
            mix: self.evidence.mix,
            renormalize: true,
        }
    }

    pub fn load_dataset(&self, seed: u64) -> Result<TextAttributedGraph> {
        match &self.graph.data {
            DataSource::Synthetic { params, seed: fixed } => generate_synthetic_tag(params, fixed.unwrap_or(seed)),
            DataSource::Files { nodes, edges } => load_tag(nodes, edges),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.round_config(), RoundConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            "[fed-sim]\nround = 3\n",
            "[nope]\nx = 1\n",
            "[graph-core.data]\nsource = \"synthetic\"\nparams = { clases = 3 }\n",
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn round_trip_and_overrides() {
        let c = ExperimentConfig::from_toml_str(
            "[fed-sim]\nrounds = 5\nrefresh_policy = \"static\"\n[evidence]\nb_tok = 2\n[graph-core.data]\nsource = \"synthetic\"\nseed = 4\nparams = { classes = 3 }\n",
        )
        .unwrap();
        let r = c.round_config();
        assert_eq!((r.rounds, r.policy, r.evidence.budgets.b_tok), (5, RefreshPolicy::Static, 2));
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml()).unwrap(), c);
        assert_eq!(c.load_dataset(99).unwrap().num_classes(), 3);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for bad in ["[bench-cli]\nseeds = []\n", "[gnn-backbone]\nhidden = 7\n", "[node-condense]\nratio = 0.0\n"] {
            assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
