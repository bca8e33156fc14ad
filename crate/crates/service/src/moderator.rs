//! The moderation pipeline on top of the event log.
//!
//! Every mutating operation checks its event against the current state,
//! appends it to the log and then folds it in, all under one lock. The
//! classifier sits behind its own lock so a retrain can swap it without
//! blocking readers.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use wallfilter_core::eval::{benchmark_compare, BenchConfig};
use wallfilter_core::policy::{decide, DecisionKind};
use wallfilter_core::{
    ClassLabel, Corpus, ModelError, NbModel, PolicyConfig, Preprocessing, RawMessage, StopList,
    UserProfile,
};

use crate::config::ServiceConfig;
use crate::domain::{MessageStatus, PostOutcome, RejectReason, ReviewAction, StoredMessage, Wall};
use crate::error::ServiceError;
use crate::events::{read_snapshot, write_snapshot, Event, EventLog};
use crate::state::{message_id_for, ServiceState, INITIAL_MODEL_VERSION};

pub const EVENT_LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const MODELS_DIR: &str = "models";
pub const REPORTS_DIR: &str = "reports";
pub const LATEST_REPORT_FILE: &str = "latest.json";

pub struct ActiveModel {
    pub version: String,
    pub model: NbModel,
}

struct Inner {
    state: ServiceState,
    log: EventLog,
}

pub struct Moderator {
    inner: Mutex<Inner>,
    model: RwLock<Arc<ActiveModel>>,
    retrain_lock: Mutex<()>,
    stops: StopList,
    alpha: f64,
    default_policy: PolicyConfig,
    data_dir: PathBuf,
    initial_model_path: PathBuf,
    snapshot_every: u64,
}

/// One page of a wall, newest message first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallPage {
    pub wall_id: String,
    pub owner_id: String,
    pub page: usize,
    pub limit: usize,
    pub total: usize,
    pub messages: Vec<StoredMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainOutcome {
    pub model_version: String,
    pub training_docs: usize,
    pub vocabulary_size: usize,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn create_dir(path: &Path) -> Result<(), ServiceError> {
    std::fs::create_dir_all(path).map_err(|e| ServiceError::io(format!("create {}", path.display()), e))
}

impl Moderator {
    /// Restores state from the data directory (snapshot plus log tail),
    /// loads the active model and creates any configured walls that do not
    /// exist yet.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        create_dir(&config.data_dir)?;
        let stops = match &config.stop_list_path {
            Some(p) => StopList::load(p)?,
            None => StopList::english(),
        };

        let snapshot_path = config.data_dir.join(SNAPSHOT_FILE);
        let mut state = read_snapshot(&snapshot_path)?.unwrap_or_default();
        let (log, records) = EventLog::open(config.data_dir.join(EVENT_LOG_FILE), config.fsync)?;
        if state.last_seq > log.last_seq() {
            return Err(ServiceError::Log(format!(
                "snapshot is at record {} but the log ends at {}",
                state.last_seq,
                log.last_seq()
            )));
        }
        let skip = state.last_seq as usize;
        for record in &records[skip..] {
            state
                .apply(record)
                .map_err(|e| ServiceError::Log(format!("replaying record {}: {e}", record.seq)))?;
        }
        log::info!(
            "restored {} events ({} from snapshot), model {}",
            records.len(),
            skip,
            state.model_version
        );

        let model = load_model_version(&config.data_dir, &config.model_path, &state.model_version)?;
        let moderator = Moderator {
            inner: Mutex::new(Inner { state, log }),
            model: RwLock::new(Arc::new(model)),
            retrain_lock: Mutex::new(()),
            stops,
            alpha: config.alpha,
            default_policy: config.policy.clone(),
            data_dir: config.data_dir.clone(),
            initial_model_path: config.model_path.clone(),
            snapshot_every: config.snapshot_every,
        };
        for seed in &config.walls {
            if !moderator.lock().state.walls.contains_key(&seed.id) {
                moderator.create_wall(&seed.id, &seed.owner, None)?;
            }
        }
        Ok(moderator)
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn commit(&self, inner: &mut Inner, event: Event) -> Result<(), ServiceError> {
        inner.state.check(&event)?;
        let record = inner.log.append(event)?;
        inner.state.apply(&record)?;
        if self.snapshot_every > 0 && record.seq % self.snapshot_every == 0 {
            if let Err(e) = write_snapshot(&self.data_dir.join(SNAPSHOT_FILE), &inner.state) {
                log::warn!("snapshot at record {} failed: {e}", record.seq);
            }
        }
        Ok(())
    }

    pub fn active_model(&self) -> Arc<ActiveModel> {
        self.model.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn model_version(&self) -> String {
        self.active_model().version.clone()
    }

    /// A copy of the full state, for inspection and tests.
    pub fn state(&self) -> ServiceState {
        self.lock().state.clone()
    }

    pub fn create_wall(
        &self,
        wall_id: &str,
        owner_id: &str,
        policy: Option<PolicyConfig>,
    ) -> Result<Wall, ServiceError> {
        if wall_id.is_empty() || owner_id.is_empty() {
            return Err(ServiceError::InvalidInput("wall_id and owner_id must not be empty".into()));
        }
        let mut inner = self.lock();
        self.commit(
            &mut inner,
            Event::WallCreated {
                wall_id: wall_id.into(),
                owner_id: owner_id.into(),
                policy: policy.unwrap_or_else(|| self.default_policy.clone()),
                at_ms: now_ms(),
            },
        )?;
        Ok(inner.state.walls[wall_id].clone())
    }

    /// Runs a post through the pipeline. Posts from blocked authors are
    /// rejected without being classified.
    pub fn post_message(
        &self,
        wall_id: &str,
        author_id: &str,
        text: &str,
    ) -> Result<PostOutcome, ServiceError> {
        if author_id.is_empty() {
            return Err(ServiceError::InvalidInput("author_id must not be empty".into()));
        }
        let mut inner = self.lock();
        let policy = inner.state.wall(wall_id)?.policy.clone();
        let seq = inner.state.next_message_seq;
        let message = RawMessage {
            id: message_id_for(seq),
            author_id: author_id.into(),
            text: text.into(),
            label: None,
        };
        let blocked = inner
            .state
            .users
            .get(author_id)
            .is_some_and(|u| !u.is_publishable());

        let (status, evidence, model_version) = if blocked {
            let reason = RejectReason::Blocked;
            (MessageStatus::Rejected { reason }, None, None)
        } else {
            let active = self.active_model();
            let doc = Preprocessing::Full(self.stops.clone()).apply(&message);
            let posterior = active.model.classify(&doc);
            let decision = decide(&posterior, &policy);
            let status = match decision.kind {
                DecisionKind::Flag(flagged) => MessageStatus::Pending { flagged },
                _ => MessageStatus::Published,
            };
            (status, Some(posterior), Some(active.version.clone()))
        };

        let outcome = PostOutcome {
            message_id: message.id.clone(),
            status: status.clone(),
            evidence,
        };
        self.commit(
            &mut inner,
            Event::MessagePosted {
                message,
                seq,
                wall_id: wall_id.into(),
                status,
                evidence,
                model_version,
                policy,
                at_ms: now_ms(),
            },
        )?;
        Ok(outcome)
    }

    /// `page` counts from 1.
    pub fn get_wall(&self, wall_id: &str, page: usize, limit: usize) -> Result<WallPage, ServiceError> {
        if page == 0 || limit == 0 {
            return Err(ServiceError::InvalidInput("page and limit must be at least 1".into()));
        }
        let inner = self.lock();
        let wall = inner.state.wall(wall_id)?;
        let all = inner.state.wall_messages(wall_id);
        let messages = all
            .iter()
            .skip((page - 1).saturating_mul(limit))
            .take(limit)
            .map(|m| (*m).clone())
            .collect();
        Ok(WallPage {
            wall_id: wall.wall_id.clone(),
            owner_id: wall.owner_id.clone(),
            page,
            limit,
            total: all.len(),
            messages,
        })
    }

    /// Pending messages, oldest first, optionally only those flagged for `class`.
    pub fn moderation_queue(&self, class: Option<ClassLabel>) -> Vec<StoredMessage> {
        self.lock()
            .state
            .pending()
            .into_iter()
            .filter(|m| class.is_none_or(|c| m.flagged().contains(&c)))
            .cloned()
            .collect()
    }

    pub fn manager_decision(
        &self,
        message_id: &str,
        action: ReviewAction,
        actor: &str,
    ) -> Result<StoredMessage, ServiceError> {
        let mut inner = self.lock();
        self.commit(
            &mut inner,
            Event::ManagerReviewed {
                message_id: message_id.into(),
                action,
                actor: actor.into(),
                at_ms: now_ms(),
            },
        )?;
        Ok(inner.state.messages[message_id].clone())
    }

    pub fn delete_message(&self, message_id: &str, actor: &str) -> Result<StoredMessage, ServiceError> {
        let mut inner = self.lock();
        self.commit(
            &mut inner,
            Event::MessageDeleted {
                message_id: message_id.into(),
                actor: actor.into(),
                at_ms: now_ms(),
            },
        )?;
        Ok(inner.state.messages[message_id].clone())
    }

    pub fn get_user(&self, user_id: &str) -> Result<UserProfile, ServiceError> {
        self.lock().state.user(user_id).cloned()
    }

    pub fn set_user_block(
        &self,
        user_id: &str,
        blocked: bool,
        actor: &str,
    ) -> Result<UserProfile, ServiceError> {
        let mut inner = self.lock();
        self.commit(
            &mut inner,
            Event::UserBlockSet {
                user_id: user_id.into(),
                blocked,
                actor: actor.into(),
                at_ms: now_ms(),
            },
        )?;
        Ok(inner.state.users[user_id].clone())
    }

    pub fn set_wall_rules(
        &self,
        wall_id: &str,
        policy: PolicyConfig,
        actor: &str,
    ) -> Result<Wall, ServiceError> {
        let mut inner = self.lock();
        self.commit(
            &mut inner,
            Event::RulesChanged {
                wall_id: wall_id.into(),
                policy,
                actor: actor.into(),
                at_ms: now_ms(),
            },
        )?;
        Ok(inner.state.walls[wall_id].clone())
    }

    /// Trains a new model on the labeled messages of `corpus_path`, stores
    /// it under a fresh version id and makes it the active model. A
    /// comparison report for the corpus is written afterwards; failures
    /// there are logged and do not undo the retrain.
    pub fn retrain(&self, corpus_path: &Path) -> Result<RetrainOutcome, ServiceError> {
        let _serial = self.retrain_lock.lock().unwrap_or_else(|p| p.into_inner());
        let corpus = Corpus::load(corpus_path)?;
        let docs: Vec<_> = corpus
            .tokenize(&Preprocessing::Full(self.stops.clone()))
            .into_iter()
            .filter(|d| d.label.is_some())
            .collect();
        let model = NbModel::train(&docs, self.alpha)?;

        let version = format!("v{}", self.lock().state.retrain_count + 1);
        let models = self.data_dir.join(MODELS_DIR);
        create_dir(&models)?;
        let path = models.join(format!("{version}.json"));
        model
            .save(&path)
            .map_err(|e| ServiceError::io(format!("write {}", path.display()), e))?;

        let outcome = RetrainOutcome {
            model_version: version.clone(),
            training_docs: docs.len(),
            vocabulary_size: model.vocabulary_len(),
        };
        {
            let mut inner = self.lock();
            self.commit(
                &mut inner,
                Event::ModelRetrained {
                    version: version.clone(),
                    corpus_path: corpus_path.display().to_string(),
                    at_ms: now_ms(),
                },
            )?;
            *self.model.write().unwrap_or_else(|p| p.into_inner()) =
                Arc::new(ActiveModel { version, model });
        }
        if let Err(e) = self.write_report(&corpus) {
            log::warn!("comparison report after retrain failed: {e}");
        }
        Ok(outcome)
    }

    fn write_report(&self, corpus: &Corpus) -> Result<(), ServiceError> {
        let cfg = BenchConfig {
            alpha: self.alpha,
            ..BenchConfig::default()
        };
        let report = benchmark_compare(corpus, &self.stops, &cfg)?;
        let dir = self.data_dir.join(REPORTS_DIR);
        create_dir(&dir)?;
        let path = dir.join(LATEST_REPORT_FILE);
        let tmp = dir.join(format!("{LATEST_REPORT_FILE}.tmp"));
        std::fs::write(&tmp, report.to_canonical_json())
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| ServiceError::io(format!("write {}", path.display()), e))
    }

    /// The most recent comparison report as stored, if one exists.
    pub fn latest_report(&self) -> Result<Option<String>, ServiceError> {
        let path = self.data_dir.join(REPORTS_DIR).join(LATEST_REPORT_FILE);
        match std::fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ServiceError::io(format!("read {}", path.display()), e)),
        }
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn initial_model_path(&self) -> &Path {
        &self.initial_model_path
    }
}

fn load_model_version(
    data_dir: &Path,
    initial: &Path,
    version: &str,
) -> Result<ActiveModel, ServiceError> {
    let path = if version == INITIAL_MODEL_VERSION {
        initial.to_path_buf()
    } else {
        data_dir.join(MODELS_DIR).join(format!("{version}.json"))
    };
    let model = NbModel::load(&path).map_err(|e| match e {
        ModelError::CorruptModel(m) => ModelError::CorruptModel(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(ActiveModel {
        version: version.into(),
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use wallfilter_core::corpus::BUNDLED_CORPUS_XML;
    use wallfilter_core::corpus::parse_corpus_xml;

    fn setup(dir: &Path) -> ServiceConfig {
        let corpus = parse_corpus_xml(BUNDLED_CORPUS_XML.as_bytes()).unwrap();
        let docs = corpus.tokenize(&Preprocessing::Full(StopList::english()));
        let model_path = dir.join("model.json");
        NbModel::train(&docs, 1.0).unwrap().save(&model_path).unwrap();
        let mut cfg = ServiceConfig::new(dir.join("data"), model_path, "tok");
        cfg.fsync = false;
        cfg.walls.push(crate::config::WallSeed {
            id: "w".into(),
            owner: "owner".into(),
        });
        cfg
    }

    #[test]
    fn pipeline_and_restart() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path());
        let m = Moderator::open(cfg.clone()).unwrap();
        let ok = m.post_message("w", "ann", "I had a good day").unwrap();
        assert_eq!(ok.status, MessageStatus::Published);
        let bad = m.post_message("w", "bob", "I hate this woman").unwrap();
        assert!(matches!(&bad.status, MessageStatus::Pending { flagged } if flagged.contains(&ClassLabel::Hatred)));
        assert_eq!(m.moderation_queue(Some(ClassLabel::Hatred)).len(), 1);
        assert!(m.moderation_queue(Some(ClassLabel::Sexual)).is_empty());
        assert_eq!(m.get_wall("w", 1, 10).unwrap().total, 1);

        assert!(matches!(
            m.post_message("nope", "ann", "x"),
            Err(ServiceError::WallNotFound(_))
        ));
        assert!(matches!(
            m.manager_decision(&ok.message_id, ReviewAction::Approve, "mgr"),
            Err(ServiceError::NotPending(_))
        ));
        m.manager_decision(&bad.message_id, ReviewAction::Approve, "mgr").unwrap();
        assert_eq!(m.get_wall("w", 1, 10).unwrap().messages[0].id(), bad.message_id);

        m.set_user_block("ann", true, "mgr").unwrap();
        let rejected = m.post_message("w", "ann", "I had a good day").unwrap();
        assert_eq!(
            rejected.status,
            MessageStatus::Rejected {
                reason: RejectReason::Blocked
            }
        );
        assert!(rejected.evidence.is_none());

        let before = m.state();
        drop(m);
        let again = Moderator::open(cfg).unwrap();
        assert_eq!(again.state(), before);
        assert_eq!(again.state().walls.len(), 1);
    }

    #[test]
    fn snapshot_restores_the_same_state() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = setup(dir.path());
        cfg.snapshot_every = 3;
        let m = Moderator::open(cfg.clone()).unwrap();
        for i in 0..7 {
            m.post_message("w", &format!("u{}", i % 2), "I had a good day").unwrap();
        }
        let before = m.state();
        drop(m);
        assert!(cfg.data_dir.join(SNAPSHOT_FILE).exists());
        let again = Moderator::open(cfg.clone()).unwrap();
        assert_eq!(again.state(), before);

        // Same state from the log alone.
        drop(again);
        std::fs::remove_file(cfg.data_dir.join(SNAPSHOT_FILE)).unwrap();
        assert_eq!(Moderator::open(cfg).unwrap().state(), before);
    }

    #[test]
    fn rules_change_validates() {
        let dir = tempfile::tempdir().unwrap();
        let m = Moderator::open(setup(dir.path())).unwrap();
        let bad = PolicyConfig {
            tau: 0.0,
            ..PolicyConfig::default()
        };
        assert!(matches!(
            m.set_wall_rules("w", bad, "mgr"),
            Err(ServiceError::InvalidPolicy(_))
        ));
        let strict = PolicyConfig {
            tau: 0.99,
            ..PolicyConfig::default()
        };
        m.set_wall_rules("w", strict, "mgr").unwrap();
        let out = m.post_message("w", "bob", "I hate this woman").unwrap();
        assert_eq!(out.status, MessageStatus::Published);
    }

    #[test]
    fn retrain_swaps_model_and_survives_restart() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path());
        let corpus_path = dir.path().join("corpus.xml");
        std::fs::write(&corpus_path, BUNDLED_CORPUS_XML).unwrap();
        let m = Moderator::open(cfg.clone()).unwrap();
        assert_eq!(m.model_version(), "v0");
        let out = m.retrain(&corpus_path).unwrap();
        assert_eq!(out.model_version, "v1");
        assert_eq!(m.model_version(), "v1");
        assert!(m.latest_report().unwrap().is_some());
        assert!(matches!(
            m.retrain(&dir.path().join("missing.xml")),
            Err(ServiceError::Corpus(_))
        ));
        drop(m);
        assert_eq!(Moderator::open(cfg).unwrap().model_version(), "v1");
    }
}
