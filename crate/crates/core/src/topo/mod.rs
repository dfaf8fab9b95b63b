//! Fusion and condensed-topology reconstruction.

pub mod adjacency;
pub mod fusion;
pub mod ista;
pub mod prior;

pub use adjacency::synthesize_adjacency;
pub use fusion::{fuse, fuse_rows, fusion_loss, glorot, FusionLoss, FusionParams};
pub use ista::{objective, self_expression, shrink, IstaConfig, SelfExpression, SparseCoefficients};
pub use prior::{candidate_sets, evidence_prior};
