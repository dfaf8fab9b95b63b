//! Text-attributed graph model, ingestion, synthetic generation and client
//! partitioning.

pub mod io;
pub mod louvain;
pub mod ops;
pub mod partition;
pub mod synthetic;
pub mod tag;

pub use io::{load_tag, write_tag};
pub use ops::{hop_sets, k_hop_neighbors, normalize_adjacency};
pub use partition::{partition_clients, ClientGraph, ClientPartition, PartitionMethod};
pub use synthetic::{generate_synthetic_tag, SyntheticConfig};
pub use tag::{Split, TextAttributedGraph};
