//! Publish/flag decisions and per-user restriction state.
//!
//! A message is flagged for every enabled non-neutral class whose posterior
//! is at or above `tau`. Users accumulate a sliding window of their last `n`
//! decisions; once the flagged share of that window reaches `rho` the user
//! is blocked until a manager lifts it.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::PolicyError;
use crate::label::{ClassLabel, PerClass};
use crate::nbayes::ClassPosterior;

pub const DEFAULT_TAU: f64 = 0.3;
pub const DEFAULT_RHO: f64 = 0.5;
pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub tau: f64,
    pub enabled_classes: BTreeSet<ClassLabel>,
    pub rho: f64,
    #[serde(rename = "n")]
    pub window: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            tau: DEFAULT_TAU,
            enabled_classes: ClassLabel::NON_NEUTRAL.into_iter().collect(),
            rho: DEFAULT_RHO,
            window: DEFAULT_WINDOW,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: String| Err(PolicyError::InvalidPolicy(m));
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad(format!("rho must lie in (0, 1], got {}", self.rho));
        }
        if self.window == 0 {
            return bad("window n must be at least 1".into());
        }
        if self.enabled_classes.contains(&ClassLabel::Neutral) {
            return bad("neutral cannot be an enabled flag class".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "classes", rename_all = "snake_case")]
pub enum DecisionKind {
    Publish,
    Flag(BTreeSet<ClassLabel>),
    RejectedByBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModerationDecision {
    pub kind: DecisionKind,
    /// Absent only for `RejectedByBlock`, where nothing was classified.
    pub evidence: Option<ClassPosterior>,
}

impl ModerationDecision {
    pub fn rejected_by_block() -> Self {
        ModerationDecision {
            kind: DecisionKind::RejectedByBlock,
            evidence: None,
        }
    }

    pub fn flagged_classes(&self) -> BTreeSet<ClassLabel> {
        match &self.kind {
            DecisionKind::Flag(classes) => classes.clone(),
            _ => BTreeSet::new(),
        }
    }
}

/// Flags every enabled class with posterior `>= tau`.
pub fn decide(posterior: &ClassPosterior, cfg: &PolicyConfig) -> ModerationDecision {
    let flagged: BTreeSet<ClassLabel> = cfg
        .enabled_classes
        .iter()
        .copied()
        .filter(|c| !c.is_neutral() && posterior.probs[*c] >= cfg.tau)
        .collect();
    let kind = if flagged.is_empty() {
        DecisionKind::Publish
    } else {
        DecisionKind::Flag(flagged)
    };
    ModerationDecision {
        kind,
        evidence: Some(*posterior),
    }
}

/// One entry of a user's decision window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagRecord {
    pub message_id: String,
    pub flagged: BTreeSet<ClassLabel>,
}

impl FlagRecord {
    pub fn is_flagged(&self) -> bool {
        !self.flagged.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub recent_outcomes: VecDeque<FlagRecord>,
    pub per_class_flag_counts: PerClass<u64>,
    pub restricted_classes: BTreeSet<ClassLabel>,
    pub blocked: bool,
}

impl UserProfile {
    pub fn new(user_id: impl Into<String>) -> Self {
        UserProfile {
            user_id: user_id.into(),
            recent_outcomes: VecDeque::new(),
            per_class_flag_counts: PerClass::default(),
            restricted_classes: BTreeSet::new(),
            blocked: false,
        }
    }

    pub fn is_publishable(&self) -> bool {
        !self.blocked
    }

    pub fn flagged_in_window(&self) -> usize {
        self.recent_outcomes.iter().filter(|r| r.is_flagged()).count()
    }

    fn refresh_restrictions(&mut self) {
        self.restricted_classes = self
            .recent_outcomes
            .iter()
            .flat_map(|r| r.flagged.iter().copied())
            .collect();
    }

    /// Appends the outcome of a classified post. `RejectedByBlock` decisions
    /// are ignored: they carry no evidence about the message.
    ///
    /// The flagged share is measured against the window capacity `n`, not
    /// the number of posts seen so far, so a new user needs at least
    /// `ceil(rho * n)` flagged posts before being blocked.
    pub fn record(&mut self, message_id: &str, decision: &ModerationDecision, cfg: &PolicyConfig) {
        if decision.kind == DecisionKind::RejectedByBlock {
            return;
        }
        let flagged = decision.flagged_classes();
        for &c in &flagged {
            self.per_class_flag_counts[c] += 1;
        }
        self.recent_outcomes.push_back(FlagRecord {
            message_id: message_id.to_string(),
            flagged,
        });
        while self.recent_outcomes.len() > cfg.window {
            self.recent_outcomes.pop_front();
        }
        self.refresh_restrictions();
        if self.flagged_in_window() as f64 / cfg.window as f64 >= cfg.rho {
            self.blocked = true;
        }
    }

    /// Treats an earlier post as unflagged, after a manager approved it.
    /// Blocking is not lifted by this.
    pub fn clear_flags(&mut self, message_id: &str, classes: &BTreeSet<ClassLabel>) {
        for &c in classes {
            self.per_class_flag_counts[c] = self.per_class_flag_counts[c].saturating_sub(1);
        }
        if let Some(r) = self
            .recent_outcomes
            .iter_mut()
            .find(|r| r.message_id == message_id)
        {
            r.flagged.clear();
        }
        self.refresh_restrictions();
    }

    /// Manual block toggle. Unblocking also clears the decision window so
    /// the user restarts from a clean slate.
    pub fn set_blocked(&mut self, blocked: bool) {
        if self.blocked && !blocked {
            self.recent_outcomes.clear();
            self.refresh_restrictions();
        }
        self.blocked = blocked;
    }
}

/// Functional form of [`UserProfile::record`].
pub fn update_user(
    profile: &UserProfile,
    message_id: &str,
    decision: &ModerationDecision,
    cfg: &PolicyConfig,
) -> UserProfile {
    let mut next = profile.clone();
    next.record(message_id, decision, cfg);
    next
}

pub fn is_publishable(profile: &UserProfile) -> bool {
    profile.is_publishable()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn posterior(f: impl Fn(ClassLabel) -> f64) -> ClassPosterior {
        ClassPosterior::new(PerClass::from_fn(f))
    }

    fn flag(c: ClassLabel) -> ModerationDecision {
        ModerationDecision {
            kind: DecisionKind::Flag([c].into()),
            evidence: None,
        }
    }

    fn publish() -> ModerationDecision {
        ModerationDecision {
            kind: DecisionKind::Publish,
            evidence: None,
        }
    }

    #[test]
    fn below_threshold_publishes() {
        let p = posterior(|c| if c == ClassLabel::Offensive { 0.29 } else { 0.1 });
        assert_eq!(decide(&p, &PolicyConfig::default()).kind, DecisionKind::Publish);
    }

    #[test]
    fn threshold_is_inclusive() {
        let p = posterior(|c| if c == ClassLabel::Hatred { 0.30 } else { 0.0 });
        assert_eq!(
            decide(&p, &PolicyConfig::default()).kind,
            DecisionKind::Flag([ClassLabel::Hatred].into())
        );
        let p = posterior(|c| if c == ClassLabel::Hatred { 0.30 - 1e-12 } else { 0.0 });
        assert_eq!(decide(&p, &PolicyConfig::default()).kind, DecisionKind::Publish);
    }

    #[test]
    fn zero_posteriors_publish_and_neutral_never_flags() {
        assert_eq!(
            decide(&posterior(|_| 0.0), &PolicyConfig::default()).kind,
            DecisionKind::Publish
        );
        let p = posterior(|c| if c.is_neutral() { 1.0 } else { 0.0 });
        assert_eq!(decide(&p, &PolicyConfig::default()).kind, DecisionKind::Publish);
    }

    #[test]
    fn disabled_class_does_not_flag() {
        let mut cfg = PolicyConfig::default();
        cfg.enabled_classes.remove(&ClassLabel::PunIntended);
        let p = posterior(|c| if c == ClassLabel::PunIntended { 0.9 } else { 0.0 });
        assert_eq!(decide(&p, &cfg).kind, DecisionKind::Publish);
    }

    #[test]
    fn validation() {
        assert!(PolicyConfig::default().validate().is_ok());
        let mut cfg = PolicyConfig {
            tau: 1.5,
            ..PolicyConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.tau = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = PolicyConfig {
            rho: 0.0,
            ..PolicyConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.rho = 1.0;
        assert!(cfg.validate().is_ok());
        cfg.window = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = PolicyConfig::default();
        cfg.enabled_classes.insert(ClassLabel::Neutral);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fresh_profile_publish() {
        let p = update_user(&UserProfile::new("u"), "m1", &publish(), &PolicyConfig::default());
        assert!(p.per_class_flag_counts.values().all(|&n| n == 0));
        assert!(!p.blocked);
        assert!(p.is_publishable());
    }

    #[test]
    fn window_ratio_blocks() {
        let cfg = PolicyConfig {
            window: 4,
            rho: 0.5,
            ..PolicyConfig::default()
        };
        let mut p = UserProfile::new("u");
        p.record("m1", &flag(ClassLabel::Hatred), &cfg);
        p.record("m2", &publish(), &cfg);
        assert!(!p.blocked);
        p.record("m3", &flag(ClassLabel::Hatred), &cfg);
        p.record("m4", &publish(), &cfg);
        assert_eq!(p.recent_outcomes.len(), 4);
        assert!(p.blocked);
        assert!(!is_publishable(&p));
    }

    #[test]
    fn window_is_bounded() {
        let cfg = PolicyConfig {
            window: 3,
            ..PolicyConfig::default()
        };
        let mut p = UserProfile::new("u");
        for i in 0..10 {
            p.record(&format!("m{i}"), &publish(), &cfg);
        }
        assert_eq!(p.recent_outcomes.len(), 3);
        assert_eq!(p.recent_outcomes[0].message_id, "m7");
    }

    #[test]
    fn multi_class_restriction() {
        let cfg = PolicyConfig::default();
        let mut p = UserProfile::new("u");
        p.record("m1", &flag(ClassLabel::Sexual), &cfg);
        p.record("m2", &flag(ClassLabel::Hatred), &cfg);
        assert_eq!(
            p.restricted_classes,
            [ClassLabel::Sexual, ClassLabel::Hatred].into()
        );
        assert_eq!(p.per_class_flag_counts[ClassLabel::Sexual], 1);
    }

    #[test]
    fn blocked_rejection_leaves_profile_alone() {
        let cfg = PolicyConfig::default();
        let p = UserProfile::new("u");
        let q = update_user(&p, "m1", &ModerationDecision::rejected_by_block(), &cfg);
        assert_eq!(p, q);
    }

    #[test]
    fn clear_flags_and_manual_unblock() {
        let cfg = PolicyConfig {
            window: 2,
            rho: 1.0,
            ..PolicyConfig::default()
        };
        let mut p = UserProfile::new("u");
        p.record("m1", &flag(ClassLabel::Offensive), &cfg);
        p.clear_flags("m1", &[ClassLabel::Offensive].into());
        assert!(p.restricted_classes.is_empty());
        assert_eq!(p.per_class_flag_counts[ClassLabel::Offensive], 0);

        p.record("m2", &flag(ClassLabel::Offensive), &cfg);
        p.record("m3", &flag(ClassLabel::Offensive), &cfg);
        assert!(p.blocked);
        // Approval does not unblock.
        p.clear_flags("m3", &[ClassLabel::Offensive].into());
        assert!(p.blocked);
        p.set_blocked(false);
        assert!(p.is_publishable());
        assert!(p.recent_outcomes.is_empty());
        p.record("m4", &publish(), &cfg);
        assert!(!p.blocked);
    }
}
