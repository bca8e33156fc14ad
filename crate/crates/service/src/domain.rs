use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use wallfilter_core::{ClassLabel, ClassPosterior, PolicyConfig, RawMessage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub wall_id: String,
    pub owner_id: String,
    pub policy: PolicyConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// The author was blocked when posting; the text was never classified.
    Blocked,
    /// A manager rejected the message from the review queue.
    Manager,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum MessageStatus {
    Published,
    Pending { flagged: BTreeSet<ClassLabel> },
    Rejected { reason: RejectReason },
    Deleted,
}

impl MessageStatus {
    pub fn name(&self) -> &'static str {
        match self {
            MessageStatus::Published => "published",
            MessageStatus::Pending { .. } => "pending",
            MessageStatus::Rejected { .. } => "rejected",
            MessageStatus::Deleted => "deleted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewAction {
    Approve,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManagerAction {
    pub action: ReviewAction,
    pub actor: String,
    pub at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMessage {
    pub message: RawMessage,
    /// Arrival order across the whole service.
    pub seq: u64,
    pub wall_id: String,
    pub status: MessageStatus,
    pub evidence: Option<ClassPosterior>,
    pub model_version: Option<String>,
    pub manager_action: Option<ManagerAction>,
    pub posted_at_ms: u64,
    pub updated_at_ms: u64,
}

impl StoredMessage {
    pub fn id(&self) -> &str {
        &self.message.id
    }

    pub fn flagged(&self) -> BTreeSet<ClassLabel> {
        match &self.status {
            MessageStatus::Pending { flagged } => flagged.clone(),
            _ => BTreeSet::new(),
        }
    }
}

/// Result of a post as returned to the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostOutcome {
    pub message_id: String,
    pub status: MessageStatus,
    pub evidence: Option<ClassPosterior>,
}
