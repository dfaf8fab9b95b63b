//! Round-wise orchestration: broadcast, per-client condensation and training, aggregation.

use std::sync::Arc;

use ndarray::Array2;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ledger::{CommunicationLedger, Direction, LedgerEntry, PayloadKind};
use super::metrics::{accuracy, macro_f1};
use super::model::{aggregate, GlobalModel, NamedTensor};
use super::privacy::apply_privacy_noise;
use super::tracking::{artifact_hash, budget_stats, compare_refreshes, unbudgeted_tokens, BudgetStats, StabilityStats};
use crate::condense::{assign_pseudo_labels, condense_nodes, random_core, CondensedCore};
use crate::error::{Error, Result};
use crate::evidence::{
    build_pack, compute_evidence, evidence_backward, EvidenceConfig, EvidenceInputs, EvidencePack, EvidenceTrace,
    ExtractiveSummarizer, SelectionParams, SummaryCache,
};
use crate::gnn::{backbone_view, gcn_train_step, predict_nodes, BackboneView, GraphContext};
use crate::graph::{normalize_adjacency, partition_clients, PartitionMethod, Split, TextAttributedGraph};
use crate::rng::{self, derive_seed};
use crate::text::{BankCache, ChunkEmbeddingBank, Encoder};
use crate::topo::{candidate_sets, evidence_prior, fuse_rows, fusion_loss, self_expression, synthesize_adjacency, FusionParams, IstaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RefreshPolicy {
    #[default]
    Full,
    Static,
    CoreOnly,
    TextOnly,
    /// Uniformly random core drawn once; evidence refreshed every round.
    RandomCore,
    /// Uniformly random core redrawn on the condensation schedule.
    RandomRedraw,
}

impl RefreshPolicy {
    pub fn refreshes_core(self) -> bool {
        matches!(self, Self::Full | Self::CoreOnly | Self::RandomRedraw)
    }

    pub fn refreshes_text(self) -> bool {
        matches!(self, Self::Full | Self::TextOnly | Self::RandomCore | Self::RandomRedraw)
    }

    pub fn is_random(self) -> bool {
        matches!(self, Self::RandomCore | Self::RandomRedraw)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Static => "static",
            Self::CoreOnly => "core_only",
            Self::TextOnly => "text_only",
            Self::RandomCore => "random_core",
            Self::RandomRedraw => "random_redraw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Faults {
    /// Tries to upload each client's evidence packs; the ledger must refuse.
    pub ship_evidence: bool,
    /// Truncation keeps the top-B weights without renormalizing.
    pub truncate_without_renormalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundConfig {
    pub rounds: usize,
    pub clients: usize,
    pub participation: f64,
    pub local_epochs: usize,
    pub period: usize,
    pub policy: RefreshPolicy,
    pub partition: PartitionMethod,
    pub ratio: f64,
    pub tau: f64,
    pub prototypes: usize,
    pub evidence: EvidenceConfig,
    pub ista: IstaConfig,
    pub q: usize,
    pub k: usize,
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub fusion_lr: f64,
    pub lambda_align: f64,
    pub privacy_epsilon: Option<f64>,
    /// Evaluate every n rounds (and always on the last one).
    pub eval_every: usize,
    pub faults: Faults,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            rounds: 200,
            clients: 5,
            participation: 1.0,
            local_epochs: 3,
            period: 10,
            policy: RefreshPolicy::Full,
            partition: PartitionMethod::Louvain,
            ratio: 0.08,
            tau: 0.8,
            prototypes: 3,
            evidence: EvidenceConfig::default(),
            ista: IstaConfig::default(),
            q: 3,
            k: 3,
            hidden: 128,
            lr: 1e-2,
            weight_decay: 5e-4,
            dropout: 0.5,
            fusion_lr: 1e-2,
            lambda_align: 0.1,
            privacy_epsilon: None,
            eval_every: 1,
            faults: Faults::default(),
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if self.clients == 0 {
            return bad("clients must be at least 1");
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return bad("participation must be in (0, 1]");
        }
        if self.period == 0 {
            return bad("node_condense_period must be at least 1");
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return bad("ratio must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.evidence.mix) {
            return bad("mix must be in [0, 1]");
        }
        if self.prototypes == 0 || self.q == 0 || self.k == 0 || self.eval_every == 0 {
            return bad("prototypes, q, k and eval_every must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if let Some(e) = self.privacy_epsilon {
            if !(e > 0.0) {
                return bad("privacy epsilon must be positive");
            }
        }
        self.evidence.budgets.validate()
    }

    fn evidence_config(&self) -> EvidenceConfig {
        EvidenceConfig {
            renormalize: self.evidence.renormalize && !self.faults.truncate_without_renormalize,
            ..self.evidence
        }
    }
}

pub struct ClientState {
    pub id: usize,
    pub graph: TextAttributedGraph,
    pub global_index: Vec<usize>,
    pub bank: Arc<ChunkEmbeddingBank>,
    pub ctx: GraphContext,
    bank_hash: String,
    visible_labels: Vec<Option<usize>>,
    pub core: Option<CondensedCore>,
    traces: Option<Vec<EvidenceTrace>>,
    pub packs: Vec<EvidencePack>,
    pub summaries: SummaryCache,
    pub first_artifact_hash: Option<String>,
    pub artifact_hash: Option<String>,
    /// Core or evidence recomputations after the first round.
    pub recomputations: usize,
}

impl ClientState {
    pub fn new(id: usize, graph: TextAttributedGraph, global_index: Vec<usize>, bank: Arc<ChunkEmbeddingBank>) -> Self {
        let ctx = GraphContext::new(&graph, &bank);
        let visible_labels = (0..graph.node_count())
            .map(|v| if graph.is_labeled(v) { graph.label(v) } else { None })
            .collect();
        Self {
            id,
            bank_hash: bank.content_hash(),
            graph,
            global_index,
            bank,
            ctx,
            visible_labels,
            core: None,
            traces: None,
            packs: Vec::new(),
            summaries: SummaryCache::default(),
            first_artifact_hash: None,
            artifact_hash: None,
            recomputations: 0,
        }
    }

    pub fn traces(&self) -> Option<&[EvidenceTrace]> {
        self.traces.as_deref()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClientRoundStats {
    pub client: usize,
    pub core_refreshed: bool,
    pub evidence_refreshed: bool,
    pub labeled_core: usize,
    pub loss: Option<f64>,
    pub budget: BudgetStats,
    pub stability: StabilityStats,
    pub unbudgeted_tokens: usize,
    pub ista_descent_violations: usize,
    pub synthetic_edges: usize,
}

struct ClientOutcome {
    delta: Vec<NamedTensor>,
    weight: f64,
    stats: ClientRoundStats,
    extra_payloads: Vec<PayloadKind>,
}

fn sgd(m: &mut Array2<f64>, g: &Array2<f64>, lr: f64, wd: f64) {
    m.zip_mut_with(g, |w, &gw| *w -= lr * (gw + wd * *w));
}

fn fusion_sgd(p: &mut FusionParams, g: &FusionParams, lr: f64, wd: f64) {
    sgd(&mut p.w_g, &g.w_g, lr, wd);
    sgd(&mut p.w_t, &g.w_t, lr, wd);
    p.w.zip_mut_with(&g.w, |w, &gw| *w -= lr * (gw + wd * *w));
    sgd(&mut p.dec, &g.dec, lr, wd);
    sgd(&mut p.dec_g, &g.dec_g, lr, wd);
    sgd(&mut p.dec_t, &g.dec_t, lr, wd);
}

fn selection_sgd(p: &mut SelectionParams, g: &SelectionParams, lr: f64, wd: f64) {
    sgd(&mut p.w_q, &g.w_q, lr, wd);
    sgd(&mut p.w_k, &g.w_k, lr, wd);
    sgd(&mut p.w_s, &g.w_s, lr, wd);
    p.gamma.scaled_add(-lr, &g.gamma);
    p.project_gamma();
}

fn rows(src: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    src.select(ndarray::Axis(0), idx)
}

fn trace_rows(traces: &[EvidenceTrace], d: usize) -> Array2<f64> {
    let mut t = Array2::zeros((traces.len(), d));
    for (i, tr) in traces.iter().enumerate() {
        t.row_mut(i).assign(&tr.t_tilde);
    }
    t
}

fn evidence_for(nodes: &[usize], inputs: EvidenceInputs<'_>, params: &SelectionParams, cfg: &EvidenceConfig) -> Result<Vec<EvidenceTrace>> {
    nodes.iter().map(|&v| compute_evidence(v, inputs, params, cfg)).collect()
}

fn client_round(c: &mut ClientState, model: &GlobalModel, cfg: &RoundConfig, seed: u64, round: usize) -> Result<ClientOutcome> {
    if c.bank.content_hash() != c.bank_hash {
        return Err(Error::Invariant(format!("text bank of client {} changed during the run", c.id)));
    }
    let ecfg = cfg.evidence_config();
    let view: BackboneView = backbone_view(&c.ctx, &model.gcn)?;
    let inputs = EvidenceInputs {
        bank: &c.bank,
        g: &view.g,
        hops: &c.ctx.hops,
        difficulty: &view.difficulty,
    };
    let mut stats = ClientRoundStats {
        client: c.id,
        ..ClientRoundStats::default()
    };

    let first = c.core.is_none();
    let refresh_core = first || (cfg.policy.refreshes_core() && (round - 1).is_multiple_of(cfg.period));
    if refresh_core {
        let table = assign_pseudo_labels(&view.probs, &c.visible_labels, cfg.tau);
        let core = if cfg.policy.is_random() {
            random_core(&table, cfg.ratio, &mut rng::stream(seed, &format!("client.{}.random_core.{round}", c.id)))
        } else {
            condense_nodes(&table, &view.g, cfg.ratio, cfg.prototypes, derive_seed(seed, &format!("client.{}.condense.{round}", c.id)))
        };
        c.core = Some(core);
    }
    let core_nodes = c.core.as_ref().unwrap().node_ids.clone();
    let refresh_text = refresh_core || cfg.policy.refreshes_text();
    if refresh_text {
        let traces = evidence_for(&core_nodes, inputs, &model.selection, &ecfg)?;
        if let Some(prev) = &c.traces {
            stats.stability = compare_refreshes(prev, &traces, &ecfg)?;
        }
        c.packs = traces.iter().map(|t| build_pack(t, &c.graph, &c.bank, round)).collect();
        let (graph, summaries) = (&c.graph, &mut c.summaries);
        let index: std::collections::HashMap<u64, usize> = graph.ids().iter().enumerate().map(|(i, &id)| (id, i)).collect();
        for pack in &mut c.packs {
            summaries.summarize_pack(pack, &ExtractiveSummarizer, |id| index.get(&id).map(|&i| graph.text(i)));
        }
        c.traces = Some(traces);
        if !first {
            c.recomputations += 1;
        }
    }
    stats.core_refreshed = refresh_core;
    stats.evidence_refreshed = refresh_text;
    let traces = c.traces.clone().unwrap();
    let hash = artifact_hash(c.core.as_ref().unwrap(), &traces);
    if first {
        c.first_artifact_hash = Some(hash.clone());
    }
    c.artifact_hash = Some(hash);
    stats.budget = budget_stats(&traces, &c.bank, &ecfg.budgets);
    stats.unbudgeted_tokens = unbudgeted_tokens(&core_nodes, &c.ctx.hops, &c.bank);

    let mut extra_payloads = Vec::new();
    if cfg.faults.ship_evidence && !c.packs.is_empty() {
        extra_payloads.push(PayloadKind::EvidencePack);
    }

    let labels: Vec<Option<usize>> = core_nodes.iter().map(|&v| c.visible_labels[v]).collect();
    stats.labeled_core = labels.iter().filter(|l| l.is_some()).count();
    let mut local = model.clone();
    if stats.labeled_core == 0 {
        log::info!("client {} has no labeled core nodes in round {round}; parameters unchanged", c.id);
        return Ok(ClientOutcome {
            delta: local.delta_from(model),
            weight: 0.0,
            stats,
            extra_payloads,
        });
    }
    let d = model.selection.dim();
    let g_core = rows(&view.g, &core_nodes);
    let mut epoch_traces = traces;
    let mut last_loss = 0.0;
    for epoch in 0..cfg.local_epochs {
        if refresh_text && epoch > 0 {
            epoch_traces = evidence_for(&core_nodes, inputs, &local.selection, &ecfg)?;
        }
        let t_core = trace_rows(&epoch_traces, d);
        let fl = fusion_loss(g_core.view(), t_core.view(), &labels, &local.fusion, cfg.lambda_align);
        if refresh_text {
            let mut sel_grads = local.selection.zeros_like();
            for (i, tr) in epoch_traces.iter().enumerate() {
                evidence_backward(tr, inputs, &local.selection, &ecfg, fl.grad_t.row(i), &mut sel_grads);
            }
            selection_sgd(&mut local.selection, &sel_grads, cfg.fusion_lr, cfg.weight_decay);
        }
        fusion_sgd(&mut local.fusion, &fl.grads, cfg.fusion_lr, cfg.weight_decay);

        let mut x = fuse_rows(g_core.view(), t_core.view(), &local.fusion);
        if let Some(eps) = cfg.privacy_epsilon {
            x = apply_privacy_noise(&x, eps, &mut rng::stream(seed, &format!("client.{}.privacy.{round}.{epoch}", c.id)))?;
        }
        let (s, _) = evidence_prior(t_core.view());
        let cands = candidate_sets(x.view(), &s, cfg.q);
        let se = self_expression(x.view(), &s, &cands, &cfg.ista)?;
        stats.ista_descent_violations += se.descent_violations;
        if se.descent_violations > 0 && cfg.ista.eta.is_none() {
            return Err(Error::Invariant(format!(
                "self-expression objective increased on client {} in round {round}",
                c.id
            )));
        }
        let (adj, _) = synthesize_adjacency(&se.coefficients, cfg.k);
        stats.synthetic_edges = adj.nnz() / 2;
        let a_hat = normalize_adjacency(&adj);
        let mut drop_rng = rng::stream(seed, &format!("client.{}.dropout.{round}.{epoch}", c.id));
        let gcn_loss = gcn_train_step(&a_hat, &x, &labels, &mut local.gcn, cfg.lr, cfg.weight_decay, Some(&mut drop_rng))?;
        last_loss = fl.loss + gcn_loss.unwrap_or(0.0);
    }
    stats.loss = Some(last_loss);
    Ok(ClientOutcome {
        delta: local.delta_from(model),
        weight: stats.labeled_core as f64,
        stats,
        extra_payloads,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_client: Vec<Option<f64>>,
    pub test_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub acc: Option<f64>,
    pub macro_f1: Option<f64>,
    pub loss: Option<f64>,
    pub refresh_changes: usize,
    pub tokens_per_core_node: f64,
    pub unbudgeted_tokens_per_core_node: f64,
    pub comm_bytes: usize,
    pub clients_sampled: Vec<usize>,
    pub core_size: usize,
    pub neighbor_total: usize,
    pub chunk_nnz_total: usize,
    pub budget_violations: usize,
    pub weight_sum_violations: usize,
    pub truncation_violations: usize,
    pub condensation_recomputations: usize,
    pub margin_checks: usize,
    pub set_changes: usize,
    pub margin_violations: usize,
    pub drift: f64,
    pub max_score_shift: f64,
    pub lipschitz_estimate: Option<f64>,
    /// Δ_B / (2·L̂) using the smallest margin seen this round.
    pub drift_threshold: Option<f64>,
    pub ista_descent_violations: usize,
}

pub struct FedState {
    pub cfg: RoundConfig,
    pub seed: u64,
    pub model: GlobalModel,
    prev_broadcast: Option<GlobalModel>,
    pub clients: Vec<ClientState>,
    pub ledger: CommunicationLedger,
    pub bank_cache: BankCache,
    pub round: usize,
    pub dataset_fingerprint: String,
}

impl FedState {
    pub fn new(tag: &TextAttributedGraph, cfg: RoundConfig, encoder: &Encoder, window: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let d = encoder.dim();
        if cfg.hidden != d {
            return Err(Error::Config(format!(
                "gnn hidden width {} must equal the text embedding width {d}",
                cfg.hidden
            )));
        }
        let partition = partition_clients(tag, cfg.clients, cfg.partition, derive_seed(seed, "partition"))?;
        let mut bank_cache = BankCache::default();
        let mut clients = Vec::with_capacity(partition.clients.len());
        for (id, cg) in partition.clients.into_iter().enumerate() {
            let bank = bank_cache.get_or_build(&cg.graph, window, encoder)?;
            clients.push(ClientState::new(id, cg.graph, cg.global_index, bank));
        }
        let model = GlobalModel::init(d, cfg.hidden, tag.num_classes(), cfg.dropout, &mut rng::stream(seed, "model.init"));
        Ok(Self {
            cfg,
            seed,
            model,
            prev_broadcast: None,
            clients,
            ledger: CommunicationLedger::default(),
            bank_cache,
            round: 0,
            dataset_fingerprint: tag.fingerprint(),
        })
    }

    fn sample_clients(&self, round: usize) -> Vec<usize> {
        let m = self.clients.len();
        let count = ((self.cfg.participation * m as f64).round() as usize).clamp(1, m);
        if count == m {
            return (0..m).collect();
        }
        let mut r = rng::stream(self.seed, &format!("round.{round}.sampling"));
        let mut chosen = sample(&mut r, m, count).into_vec();
        chosen.sort_unstable();
        chosen
    }

    pub fn run_round(&mut self) -> Result<RoundReport> {
        let round = self.round + 1;
        let sampled = self.sample_clients(round);
        let bytes = self.model.payload_bytes();
        for &m in &sampled {
            self.ledger.record(LedgerEntry {
                round,
                client: m,
                direction: Direction::Down,
                kind: PayloadKind::ModelBroadcast,
                bytes,
            })?;
        }
        let drift = self.prev_broadcast.as_ref().map_or(0.0, |p| p.distance(&self.model));
        let (model, cfg, seed) = (&self.model, &self.cfg, self.seed);
        let outcomes: Vec<ClientOutcome> = self
            .clients
            .par_iter_mut()
            .filter(|c| sampled.contains(&c.id))
            .map(|c| client_round(c, model, cfg, seed, round))
            .collect::<Result<Vec<_>>>()?;

        for o in &outcomes {
            for &kind in &o.extra_payloads {
                self.ledger.record(LedgerEntry {
                    round,
                    client: o.stats.client,
                    direction: Direction::Up,
                    kind,
                    bytes: 0,
                })?;
            }
            self.ledger.record(LedgerEntry {
                round,
                client: o.stats.client,
                direction: Direction::Up,
                kind: PayloadKind::ModelDelta,
                bytes,
            })?;
        }
        self.prev_broadcast = Some(self.model.clone());
        let weights: Vec<f64> = outcomes.iter().map(|o| o.weight).collect();
        if weights.iter().sum::<f64>() > 0.0 {
            let deltas: Vec<Vec<NamedTensor>> = outcomes.iter().map(|o| o.delta.clone()).collect();
            let agg = aggregate(&deltas, &weights)?;
            self.model.apply_delta(&agg)?;
        } else {
            log::warn!("round {round}: no client trained, aggregation skipped");
        }
        self.model.round = round;
        self.round = round;

        let mut budget = BudgetStats::default();
        let mut stability = StabilityStats::default();
        let mut unbudgeted = 0;
        let mut losses = Vec::new();
        let mut ista = 0;
        for o in &outcomes {
            budget.merge(&o.stats.budget);
            stability.merge(&o.stats.stability);
            unbudgeted += o.stats.unbudgeted_tokens;
            ista += o.stats.ista_descent_violations;
            losses.extend(o.stats.loss);
        }
        let per_core = |x: usize| if budget.core_nodes == 0 { 0.0 } else { x as f64 / budget.core_nodes as f64 };
        let lipschitz = (drift > 0.0 && stability.margin_checks > 0).then(|| stability.max_score_shift / drift);
        let drift_threshold = match (lipschitz, stability.min_margin) {
            (Some(l), Some(m)) if l > 0.0 => Some(m / (2.0 * l)),
            _ => None,
        };
        let evaluate = round.is_multiple_of(self.cfg.eval_every) || round == self.cfg.rounds;
        let metrics = if evaluate { Some(self.evaluate()?) } else { None };
        Ok(RoundReport {
            round,
            acc: metrics.as_ref().map(|m| m.accuracy),
            macro_f1: metrics.as_ref().map(|m| m.macro_f1),
            loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            refresh_changes: stability.refresh_changes,
            tokens_per_core_node: per_core(budget.tokens_total),
            unbudgeted_tokens_per_core_node: per_core(unbudgeted),
            comm_bytes: self.ledger.bytes_in_round(round),
            clients_sampled: sampled,
            core_size: budget.core_nodes,
            neighbor_total: budget.neighbor_total,
            chunk_nnz_total: budget.chunk_nnz_total,
            budget_violations: budget.budget_violations,
            weight_sum_violations: budget.weight_sum_violations,
            truncation_violations: budget.truncation_violations,
            condensation_recomputations: self.clients.iter().map(|c| c.recomputations).sum(),
            margin_checks: stability.margin_checks,
            set_changes: stability.set_changes,
            margin_violations: stability.margin_violations,
            drift,
            max_score_shift: stability.max_score_shift,
            lipschitz_estimate: lipschitz,
            drift_threshold,
            ista_descent_violations: ista,
        })
    }

    /// Test-split metrics of the current global model over all clients.
    pub fn evaluate(&self) -> Result<EvalMetrics> {
        let ecfg = self.cfg.evidence_config();
        let per: Vec<(Vec<usize>, Vec<usize>)> = self
            .clients
            .iter()
            .map(|c| {
                let nodes: Vec<usize> = c.graph.nodes_in(Split::Test).into_iter().filter(|&v| c.graph.label(v).is_some()).collect();
                if nodes.is_empty() {
                    return Ok((Vec::new(), Vec::new()));
                }
                let view = backbone_view(&c.ctx, &self.model.gcn)?;
                let p = predict_nodes(&c.ctx, &c.bank, &view, &self.model.selection, &self.model.fusion, &ecfg, &nodes)?;
                let pred = (0..nodes.len()).map(|i| p.predicted_class(i)).collect();
                let truth = nodes.iter().map(|&v| c.graph.label(v).unwrap()).collect();
                Ok((pred, truth))
            })
            .collect::<Result<_>>()?;
        let (mut pred, mut truth) = (Vec::new(), Vec::new());
        let mut per_client = Vec::new();
        for (p, t) in per {
            per_client.push((!t.is_empty()).then(|| accuracy(&p, &t)));
            pred.extend(p);
            truth.extend(t);
        }
        if truth.is_empty() {
            log::warn!("empty test split, metrics omitted");
        }
        Ok(EvalMetrics {
            accuracy: accuracy(&pred, &truth),
            macro_f1: macro_f1(&pred, &truth),
            per_client,
            test_nodes: truth.len(),
        })
    }

    /// Runs the remaining rounds.
    pub fn run(&mut self) -> Result<Vec<RoundReport>> {
        let mut reports = Vec::with_capacity(self.cfg.rounds);
        while self.round < self.cfg.rounds {
            reports.push(self.run_round()?);
        }
        Ok(reports)
    }
}
