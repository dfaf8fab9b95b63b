//! Federated simulation: rounds, aggregation, privacy and the communication ledger.

pub mod checkpoint;
pub mod ledger;
pub mod metrics;
pub mod model;
pub mod privacy;
pub mod round;
pub mod tracking;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use ledger::{CommunicationLedger, Direction, LedgerEntry, PayloadKind};
pub use metrics::{accuracy, macro_f1};
pub use model::{aggregate, GlobalModel, NamedTensor};
pub use privacy::{apply_privacy_noise, laplace};
pub use round::{ClientRoundStats, ClientState, EvalMetrics, FedState, Faults, RefreshPolicy, RoundConfig, RoundReport};
