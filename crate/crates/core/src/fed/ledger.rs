//! Record of everything placed on the simulated wire.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    ModelBroadcast,
    ModelDelta,
    EvidencePack,
    Summary,
    RawText,
    Adjacency,
}

impl PayloadKind {
    pub fn is_model(self) -> bool {
        matches!(self, Self::ModelBroadcast | Self::ModelDelta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Down,
    Up,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub round: usize,
    pub client: usize,
    pub direction: Direction,
    pub kind: PayloadKind,
    pub bytes: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CommunicationLedger {
    entries: Vec<LedgerEntry>,
}

impl CommunicationLedger {
    /// Appends a model payload; anything else is refused and fails the run.
    pub fn record(&mut self, entry: LedgerEntry) -> Result<()> {
        if !entry.kind.is_model() {
            return Err(Error::PrivacyViolation(format!(
                "{:?} from client {} in round {}",
                entry.kind, entry.client, entry.round
            )));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn bytes_in_round(&self, round: usize) -> usize {
        self.entries.iter().filter(|e| e.round == round).map(|e| e.bytes).sum()
    }

    pub fn total_bytes(&self) -> usize {
        self.entries.iter().map(|e| e.bytes).sum()
    }

    pub fn only_model_payloads(&self) -> bool {
        self.entries.iter().all(|e| e.kind.is_model())
    }
}
