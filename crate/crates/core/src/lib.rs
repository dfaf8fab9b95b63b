//! Federated condensation of text-attributed graphs.
//!
//! Each simulated client condenses its local subgraph every round: a
//! label-aware node core, budgeted neighbor and chunk evidence with local
//! provenance, and a self-expressive topology over the core. A 2-layer GCN is
//! trained on the condensed graph and aggregated with FedAvg. Only model
//! parameters cross the simulated wire.

pub mod condense;
pub mod error;
pub mod evidence;
pub mod experiment;
pub mod fed;
pub mod gnn;
pub mod graph;
pub mod linalg;
pub mod rng;
pub mod text;
pub mod topo;

pub use error::{Error, Result};
