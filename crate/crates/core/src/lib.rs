//! Moderation pipeline for social-network walls.
//!
//! Messages are preprocessed into bags of lowercase tokens ([`corpus`]),
//! scored with five independent one-vs-rest Naive Bayes posteriors
//! ([`nbayes`]) and turned into publish/flag decisions with per-user
//! restriction tracking ([`policy`]). A linear SVM ([`svm`]) trained on the
//! same features serves as the comparison baseline for [`eval`].

pub mod corpus;
pub mod error;
pub mod eval;
pub mod label;
pub mod nbayes;
pub mod policy;
pub mod svm;

pub use corpus::{Corpus, Preprocessing, RawMessage, StopList, TokenizedDoc};
pub use error::{CorpusError, EvalError, ModelError, PolicyError};
pub use label::{ClassLabel, PerClass};
pub use nbayes::{ClassPosterior, NbModel};
pub use policy::{DecisionKind, ModerationDecision, PolicyConfig, UserProfile};
pub use svm::{SvmModel, SvmParams};
