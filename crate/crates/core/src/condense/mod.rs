//! Label-aware node condensation.

mod core;
pub mod kmeans;
pub mod pseudo;
pub mod quota;

pub use self::core::{condense_nodes, core_budget, random_core, select_core, CondensedCore};
pub use kmeans::{class_prototypes, prototype_score};
pub use pseudo::{assign_pseudo_labels, entropy, PseudoLabel, PseudoLabelTable};
pub use quota::{allocate_quotas, Quotas};
