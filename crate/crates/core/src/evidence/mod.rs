//! Budgeted text-evidence selection.

pub mod pack;
pub mod select;
pub mod sparse;
pub mod truncate;

pub use pack::{build_pack, EvidenceChunk, EvidencePack, ExtractiveSummarizer, GatedNeighbor, SummaryCache, Summarizer};
pub use select::{
    compute_evidence, evidence_backward, gate_neighbors, hierarchical_context, prefilter_two_hop, Budgets, EvidenceConfig,
    EvidenceInputs, EvidenceTrace, HopGate, SelectionParams,
};
pub use sparse::{entmax15, sparsemax, SparseMap};
pub use truncate::{
    selected_set, tail_mass, top_b_margin, top_b_truncate, verify_selection_stability, verify_truncation_bound,
    StabilityOutcome, TruncationCheck,
};
