//! GCN backbone and inference.

pub mod gcn;
pub mod predict;

pub use gcn::{apply_gradients, class_probabilities, gcn_forward, gcn_gradients, gcn_train_step, GcnForward, GcnGradients, GcnParams};
pub use predict::{backbone_view, predict_full, predict_nodes, BackboneView, GraphContext, Prediction};
