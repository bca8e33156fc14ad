//! In-memory service state, a pure fold over the event log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use wallfilter_core::policy::{DecisionKind, ModerationDecision};
use wallfilter_core::UserProfile;

use crate::domain::{ManagerAction, MessageStatus, RejectReason, ReviewAction, StoredMessage, Wall};
use crate::error::ServiceError;
use crate::events::{Event, LogRecord};

/// Version id of the model configured at startup, before any retrain.
pub const INITIAL_MODEL_VERSION: &str = "v0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceState {
    pub walls: BTreeMap<String, Wall>,
    pub messages: BTreeMap<String, StoredMessage>,
    pub users: BTreeMap<String, UserProfile>,
    /// Sequence number the next post will get.
    pub next_message_seq: u64,
    pub model_version: String,
    pub retrain_count: u64,
    /// Sequence number of the last log record folded in.
    pub last_seq: u64,
}

impl Default for ServiceState {
    fn default() -> Self {
        ServiceState {
            walls: BTreeMap::new(),
            messages: BTreeMap::new(),
            users: BTreeMap::new(),
            next_message_seq: 1,
            model_version: INITIAL_MODEL_VERSION.into(),
            retrain_count: 0,
            last_seq: 0,
        }
    }
}

pub fn message_id_for(seq: u64) -> String {
    format!("m{seq:06}")
}

impl ServiceState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn wall(&self, wall_id: &str) -> Result<&Wall, ServiceError> {
        self.walls
            .get(wall_id)
            .ok_or_else(|| ServiceError::WallNotFound(wall_id.into()))
    }

    pub fn message(&self, message_id: &str) -> Result<&StoredMessage, ServiceError> {
        self.messages
            .get(message_id)
            .ok_or_else(|| ServiceError::MessageNotFound(message_id.into()))
    }

    pub fn user(&self, user_id: &str) -> Result<&UserProfile, ServiceError> {
        self.users
            .get(user_id)
            .ok_or_else(|| ServiceError::UserNotFound(user_id.into()))
    }

    /// Whether `event` can be applied to the current state.
    pub fn check(&self, event: &Event) -> Result<(), ServiceError> {
        match event {
            Event::WallCreated { wall_id, policy, .. } => {
                if self.walls.contains_key(wall_id) {
                    return Err(ServiceError::WallExists(wall_id.clone()));
                }
                policy.validate()?;
            }
            Event::MessagePosted { message, seq, wall_id, .. } => {
                self.wall(wall_id)?;
                if *seq != self.next_message_seq || message.id != message_id_for(*seq) {
                    return Err(ServiceError::Log(format!(
                        "post {} out of sequence, expected {}",
                        message.id,
                        message_id_for(self.next_message_seq)
                    )));
                }
            }
            Event::ManagerReviewed { message_id, .. } => {
                let m = self.message(message_id)?;
                if !matches!(m.status, MessageStatus::Pending { .. }) {
                    return Err(ServiceError::NotPending(message_id.clone()));
                }
            }
            Event::MessageDeleted { message_id, .. } => {
                if self.message(message_id)?.status != MessageStatus::Published {
                    return Err(ServiceError::NotPublished(message_id.clone()));
                }
            }
            Event::UserBlockSet { user_id, .. } => {
                self.user(user_id)?;
            }
            Event::RulesChanged { wall_id, policy, .. } => {
                self.wall(wall_id)?;
                policy.validate()?;
            }
            Event::ModelRetrained { .. } => {}
        }
        Ok(())
    }

    /// Folds one log record into the state.
    pub fn apply(&mut self, record: &LogRecord) -> Result<(), ServiceError> {
        if record.seq != self.last_seq + 1 {
            return Err(ServiceError::Log(format!(
                "record {} applied after {}",
                record.seq, self.last_seq
            )));
        }
        self.check(&record.event)?;
        match record.event.clone() {
            Event::WallCreated {
                wall_id,
                owner_id,
                policy,
                ..
            } => {
                self.walls.insert(
                    wall_id.clone(),
                    Wall {
                        wall_id,
                        owner_id,
                        policy,
                    },
                );
            }
            Event::MessagePosted {
                message,
                seq,
                wall_id,
                status,
                evidence,
                model_version,
                policy,
                at_ms,
            } => {
                let kind = match &status {
                    MessageStatus::Pending { flagged } => DecisionKind::Flag(flagged.clone()),
                    MessageStatus::Rejected { .. } => DecisionKind::RejectedByBlock,
                    _ => DecisionKind::Publish,
                };
                self.users
                    .entry(message.author_id.clone())
                    .or_insert_with(|| UserProfile::new(message.author_id.clone()))
                    .record(&message.id, &ModerationDecision { kind, evidence }, &policy);
                self.next_message_seq = seq + 1;
                self.messages.insert(
                    message.id.clone(),
                    StoredMessage {
                        message,
                        seq,
                        wall_id,
                        status,
                        evidence,
                        model_version,
                        manager_action: None,
                        posted_at_ms: at_ms,
                        updated_at_ms: at_ms,
                    },
                );
            }
            Event::ManagerReviewed {
                message_id,
                action,
                actor,
                at_ms,
            } => {
                let m = self.messages.get_mut(&message_id).expect("checked");
                let flagged = m.flagged();
                m.status = match action {
                    ReviewAction::Approve => MessageStatus::Published,
                    ReviewAction::Reject => MessageStatus::Rejected {
                        reason: RejectReason::Manager,
                    },
                };
                m.manager_action = Some(ManagerAction { action, actor, at_ms });
                m.updated_at_ms = at_ms;
                if action == ReviewAction::Approve {
                    if let Some(user) = self.users.get_mut(&m.message.author_id) {
                        user.clear_flags(&message_id, &flagged);
                    }
                }
            }
            Event::MessageDeleted { message_id, at_ms, .. } => {
                let m = self.messages.get_mut(&message_id).expect("checked");
                m.status = MessageStatus::Deleted;
                m.updated_at_ms = at_ms;
            }
            Event::UserBlockSet { user_id, blocked, .. } => {
                self.users
                    .get_mut(&user_id)
                    .expect("checked")
                    .set_blocked(blocked);
            }
            Event::RulesChanged { wall_id, policy, .. } => {
                self.walls.get_mut(&wall_id).expect("checked").policy = policy;
            }
            Event::ModelRetrained { version, .. } => {
                self.model_version = version;
                self.retrain_count += 1;
            }
        }
        self.last_seq = record.seq;
        Ok(())
    }

    /// Published messages of a wall, newest first.
    pub fn wall_messages(&self, wall_id: &str) -> Vec<&StoredMessage> {
        let mut out: Vec<_> = self
            .messages
            .values()
            .filter(|m| m.wall_id == wall_id && m.status == MessageStatus::Published)
            .collect();
        out.sort_by_key(|m| std::cmp::Reverse(m.seq));
        out
    }

    /// Messages awaiting review, oldest first.
    pub fn pending(&self) -> Vec<&StoredMessage> {
        let mut out: Vec<_> = self
            .messages
            .values()
            .filter(|m| matches!(m.status, MessageStatus::Pending { .. }))
            .collect();
        out.sort_by_key(|m| m.seq);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use wallfilter_core::{ClassLabel, PolicyConfig, RawMessage};

    fn fold(events: Vec<Event>) -> Result<ServiceState, ServiceError> {
        let mut s = ServiceState::new();
        for (i, event) in events.into_iter().enumerate() {
            s.apply(&LogRecord {
                seq: i as u64 + 1,
                event,
            })?;
        }
        Ok(s)
    }

    fn wall() -> Event {
        Event::WallCreated {
            wall_id: "w".into(),
            owner_id: "o".into(),
            policy: PolicyConfig::default(),
            at_ms: 0,
        }
    }

    fn post(seq: u64, author: &str, status: MessageStatus) -> Event {
        Event::MessagePosted {
            message: RawMessage {
                id: message_id_for(seq),
                author_id: author.into(),
                text: "t".into(),
                label: None,
            },
            seq,
            wall_id: "w".into(),
            status,
            evidence: None,
            model_version: Some("v0".into()),
            policy: PolicyConfig {
                window: 2,
                ..PolicyConfig::default()
            },
            at_ms: seq,
        }
    }

    fn pending(c: ClassLabel) -> MessageStatus {
        MessageStatus::Pending {
            flagged: [c].into(),
        }
    }

    #[test]
    fn approve_publishes_and_clears_flags() {
        let s = fold(vec![
            wall(),
            post(1, "u", MessageStatus::Published),
            post(2, "u", pending(ClassLabel::Hatred)),
            Event::ManagerReviewed {
                message_id: message_id_for(2),
                action: ReviewAction::Approve,
                actor: "m".into(),
                at_ms: 9,
            },
        ])
        .unwrap();
        let ids: Vec<_> = s.wall_messages("w").iter().map(|m| m.id()).collect();
        assert_eq!(ids, ["m000002", "m000001"]);
        assert!(s.pending().is_empty());
        let u = s.user("u").unwrap();
        assert_eq!(u.flagged_in_window(), 0);
        // 1 of a 2-slot window reached rho=0.5 before approval; the block sticks.
        assert!(u.blocked);
    }

    #[test]
    fn invalid_transitions_are_rejected() {
        let base = vec![wall(), post(1, "u", MessageStatus::Published)];
        let review = Event::ManagerReviewed {
            message_id: message_id_for(1),
            action: ReviewAction::Reject,
            actor: "m".into(),
            at_ms: 1,
        };
        let mut events = base.clone();
        events.push(review);
        assert!(matches!(fold(events), Err(ServiceError::NotPending(_))));

        let mut events = base.clone();
        events.push(post(5, "u", MessageStatus::Published));
        assert!(matches!(fold(events), Err(ServiceError::Log(_))));

        let mut events = base;
        events.push(Event::UserBlockSet {
            user_id: "nobody".into(),
            blocked: true,
            actor: "m".into(),
            at_ms: 1,
        });
        assert!(matches!(fold(events), Err(ServiceError::UserNotFound(_))));

        assert!(matches!(fold(vec![wall(), wall()]), Err(ServiceError::WallExists(_))));
    }

    #[test]
    fn deleted_messages_leave_the_wall() {
        let s = fold(vec![
            wall(),
            post(1, "u", MessageStatus::Published),
            Event::MessageDeleted {
                message_id: message_id_for(1),
                actor: "m".into(),
                at_ms: 2,
            },
        ])
        .unwrap();
        assert!(s.wall_messages("w").is_empty());
        assert_eq!(s.message("m000001").unwrap().status, MessageStatus::Deleted);
    }
}
