//! One-vs-rest multinomial Naive Bayes.
//!
//! Each class `c` is scored as a binary hypothesis against the union of the
//! other four classes:
//!
//! ```text
//!              L(c) P(c)
//! P(c | d) = ---------------------------
//!            L(c) P(c) + L(!c) P(!c)
//! ```
//!
//! where `L(c)` is the product over the document's tokens (with
//! multiplicity) of the Laplace-smoothed token likelihood under `c`, and
//! `L(!c)` the same product using the pooled counts of the other classes.
//! The five scores are independent; they do not sum to one.
//!
//! Products are evaluated as a log-odds sum and mapped back through the
//! logistic function, which is algebraically the same expression and does
//! not underflow on long messages.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedDoc;
use crate::error::ModelError;
use crate::label::{ClassLabel, PerClass};

pub const NB_FORMAT: &str = "wallfilter-nb";
pub const NB_FORMAT_VERSION: u64 = 1;

pub const DEFAULT_ALPHA: f64 = 1.0;

/// Trained model state. Immutable once built; share it behind an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    alpha: f64,
    token_counts: BTreeMap<String, PerClass<u64>>,
    class_token_totals: PerClass<u64>,
    class_doc_counts: PerClass<u64>,
    total_docs: u64,
}

/// The five one-vs-rest posteriors for a document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPosterior {
    pub argmax: ClassLabel,
    pub probs: PerClass<f64>,
}

impl ClassPosterior {
    /// Picks the argmax with ties going to the earliest declared label.
    pub fn new(probs: PerClass<f64>) -> Self {
        ClassPosterior {
            argmax: argmax(&probs),
            probs,
        }
    }

    pub fn prob(&self, c: ClassLabel) -> f64 {
        self.probs[c]
    }
}

pub(crate) fn argmax(values: &PerClass<f64>) -> ClassLabel {
    let mut best = ClassLabel::Neutral;
    for (c, &v) in values.iter() {
        if v > values[best] {
            best = c;
        }
    }
    best
}

/// Distinct tokens with their counts, in sorted order, so that sums over a
/// document do not depend on token order even in the last bit.
fn token_multiplicities(tokens: &[String]) -> BTreeMap<&str, u64> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl NbModel {
    /// Counts token occurrences per class over `docs`. Every doc must carry
    /// a label. Classes with no documents get prior zero.
    pub fn train(docs: &[TokenizedDoc], alpha: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ModelError::NonPositiveAlpha(alpha));
        }
        if docs.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let mut token_counts: BTreeMap<String, PerClass<u64>> = BTreeMap::new();
        let mut class_token_totals = PerClass::default();
        let mut class_doc_counts = PerClass::default();
        for doc in docs {
            let label = doc
                .label
                .ok_or_else(|| ModelError::UnlabeledDoc(doc.message_id.clone()))?;
            class_doc_counts[label] += 1;
            class_token_totals[label] += doc.tokens.len() as u64;
            for token in &doc.tokens {
                token_counts.entry(token.clone()).or_default()[label] += 1;
            }
        }
        Ok(NbModel {
            alpha,
            token_counts,
            class_token_totals,
            class_doc_counts,
            total_docs: docs.len() as u64,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.token_counts.keys().map(String::as_str)
    }

    pub fn vocabulary_len(&self) -> usize {
        self.token_counts.len()
    }

    pub fn total_docs(&self) -> u64 {
        self.total_docs
    }

    pub fn class_doc_counts(&self) -> &PerClass<u64> {
        &self.class_doc_counts
    }

    pub fn class_token_totals(&self) -> &PerClass<u64> {
        &self.class_token_totals
    }

    pub fn token_count(&self, token: &str, c: ClassLabel) -> u64 {
        self.token_counts.get(token).map_or(0, |counts| counts[c])
    }

    pub fn prior(&self, c: ClassLabel) -> f64 {
        self.class_doc_counts[c] as f64 / self.total_docs as f64
    }

    // The smoothing denominator uses at least one vocabulary slot so a model
    // trained only on empty docs still yields finite likelihoods.
    fn smoothing_mass(&self) -> f64 {
        self.alpha * self.token_counts.len().max(1) as f64
    }

    /// Smoothed `P(token | c)`, or `P(token | not c)` with `complement`,
    /// where the complement pools the counts of every other class. Unknown
    /// tokens count as zero.
    pub fn token_likelihood(&self, token: &str, c: ClassLabel, complement: bool) -> f64 {
        let (count, total) = if complement {
            let all: u64 = self.token_counts.get(token).map_or(0, |v| v.values().sum());
            let all_total: u64 = self.class_token_totals.values().sum();
            (
                all - self.token_count(token, c),
                all_total - self.class_token_totals[c],
            )
        } else {
            (self.token_count(token, c), self.class_token_totals[c])
        };
        (count as f64 + self.alpha) / (total as f64 + self.smoothing_mass())
    }

    /// Log posterior odds `ln [L(c) P(c)] - ln [L(!c) P(!c)]` for a document
    /// with both priors non-zero.
    fn log_odds(&self, tokens: &[String], c: ClassLabel) -> f64 {
        let in_class = self.class_doc_counts[c] as f64;
        let rest = (self.total_docs - self.class_doc_counts[c]) as f64;
        let mut z = in_class.ln() - rest.ln();
        for (token, n) in token_multiplicities(tokens) {
            z += n as f64
                * (self.token_likelihood(token, c, false).ln()
                    - self.token_likelihood(token, c, true).ln());
        }
        z
    }

    /// One-vs-rest posterior `P(c | doc)`.
    pub fn posterior(&self, doc: &TokenizedDoc, c: ClassLabel) -> f64 {
        let in_class = self.class_doc_counts[c];
        if in_class == 0 {
            0.0
        } else if in_class == self.total_docs {
            1.0
        } else {
            logistic(self.log_odds(&doc.tokens, c))
        }
    }

    /// The same expression with the roles of `c` and `not c` exchanged,
    /// i.e. `P(not c | doc)`. Evaluated independently of [`Self::posterior`].
    pub fn complement_posterior(&self, doc: &TokenizedDoc, c: ClassLabel) -> f64 {
        let in_class = self.class_doc_counts[c];
        if in_class == 0 {
            return 1.0;
        } else if in_class == self.total_docs {
            return 0.0;
        }
        let rest = (self.total_docs - in_class) as f64;
        let mut z = rest.ln() - (in_class as f64).ln();
        for (token, n) in token_multiplicities(&doc.tokens) {
            z += n as f64
                * (self.token_likelihood(token, c, true).ln()
                    - self.token_likelihood(token, c, false).ln());
        }
        logistic(z)
    }

    pub fn classify(&self, doc: &TokenizedDoc) -> ClassPosterior {
        ClassPosterior::new(PerClass::from_fn(|c| self.posterior(doc, c)))
    }

    /// Canonical model document: pretty JSON with lexicographically sorted
    /// keys and a trailing newline. Equal models give identical bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let file = NbModelFile {
            alpha: self.alpha,
            class_doc_counts: self.class_doc_counts,
            class_token_totals: self.class_token_totals,
            format: NB_FORMAT.to_string(),
            format_version: NB_FORMAT_VERSION,
            labels: ClassLabel::ALL.to_vec(),
            token_counts: self
                .token_counts
                .iter()
                .map(|(t, counts)| {
                    let nonzero = counts
                        .iter()
                        .filter(|(_, &n)| n > 0)
                        .map(|(c, &n)| (c.as_str().to_string(), n))
                        .collect();
                    (t.clone(), nonzero)
                })
                .collect(),
            total_docs: self.total_docs,
        };
        let mut out = serde_json::to_vec_pretty(&file).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let value = check_header(bytes, NB_FORMAT, NB_FORMAT_VERSION)?;
        let file: NbModelFile =
            serde_json::from_value(value).map_err(|e| ModelError::CorruptModel(e.to_string()))?;
        if file.labels != ClassLabel::ALL {
            return Err(ModelError::CorruptModel("unexpected label set".into()));
        }
        let mut token_counts = BTreeMap::new();
        for (token, counts) in file.token_counts {
            let mut per_class = PerClass::default();
            for (label, n) in counts {
                let c: ClassLabel = label
                    .parse()
                    .map_err(|_| ModelError::CorruptModel(format!("unknown class {label:?}")))?;
                per_class[c] = n;
            }
            token_counts.insert(token, per_class);
        }
        let model = NbModel {
            alpha: file.alpha,
            token_counts,
            class_token_totals: file.class_token_totals,
            class_doc_counts: file.class_doc_counts,
            total_docs: file.total_docs,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let corrupt = |m: &str| Err(ModelError::CorruptModel(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return corrupt("alpha must be positive");
        }
        if self.class_doc_counts.values().sum::<u64>() != self.total_docs || self.total_docs == 0 {
            return corrupt("class document counts do not sum to total_docs");
        }
        for c in ClassLabel::ALL {
            let sum: u64 = self.token_counts.values().map(|v| v[c]).sum();
            if sum != self.class_token_totals[c] {
                return corrupt("class token totals disagree with the token table");
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(|e| ModelError::CorruptModel(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

/// Parses the JSON envelope and checks the format tag and version before the
/// body is interpreted.
pub(crate) fn check_header(
    bytes: &[u8],
    format: &str,
    version: u64,
) -> Result<serde_json::Value, ModelError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| ModelError::CorruptModel(e.to_string()))?;
    let found_format = value.get("format").and_then(|v| v.as_str());
    if found_format != Some(format) {
        return Err(ModelError::CorruptModel(format!(
            "expected format {format:?}, found {found_format:?}"
        )));
    }
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ModelError::CorruptModel("missing format_version".into()))?;
    if found != version {
        return Err(ModelError::VersionMismatch {
            found,
            expected: version,
        });
    }
    Ok(value)
}

// Field order is alphabetical: serde emits struct fields in declaration order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NbModelFile {
    alpha: f64,
    class_doc_counts: PerClass<u64>,
    class_token_totals: PerClass<u64>,
    format: String,
    format_version: u64,
    labels: Vec<ClassLabel>,
    token_counts: BTreeMap<String, BTreeMap<String, u64>>,
    total_docs: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(tokens: &[&str], label: ClassLabel) -> TokenizedDoc {
        TokenizedDoc::from_tokens(tokens.iter().copied()).labeled(label)
    }

    fn two_doc_model() -> NbModel {
        NbModel::train(
            &[
                doc(&["good", "day"], ClassLabel::Neutral),
                doc(&["hate", "woman"], ClassLabel::Hatred),
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn train_counts() {
        let m = two_doc_model();
        assert_eq!(m.class_doc_counts()[ClassLabel::Neutral], 1);
        assert_eq!(m.class_doc_counts()[ClassLabel::Hatred], 1);
        assert_eq!(m.class_doc_counts()[ClassLabel::Sexual], 0);
        assert_eq!(
            m.vocabulary().collect::<Vec<_>>(),
            ["day", "good", "hate", "woman"]
        );
        assert_eq!(m.class_token_totals()[ClassLabel::Neutral], 2);
    }

    #[test]
    fn single_doc_priors() {
        let m = NbModel::train(&[doc(&["x"], ClassLabel::Neutral)], 1.0).unwrap();
        assert_eq!(m.prior(ClassLabel::Neutral), 1.0);
        for c in ClassLabel::NON_NEUTRAL {
            assert_eq!(m.prior(c), 0.0);
            assert_eq!(m.posterior(&doc(&["x"], c), c), 0.0);
        }
    }

    #[test]
    fn train_errors() {
        assert!(matches!(NbModel::train(&[], 1.0), Err(ModelError::EmptyTrainingSet)));
        let d = [doc(&["x"], ClassLabel::Neutral)];
        assert!(matches!(NbModel::train(&d, 0.0), Err(ModelError::NonPositiveAlpha(_))));
        assert!(matches!(NbModel::train(&d, -1.0), Err(ModelError::NonPositiveAlpha(_))));
        assert!(matches!(
            NbModel::train(&d, f64::NAN),
            Err(ModelError::NonPositiveAlpha(_))
        ));
        let unlabeled = [TokenizedDoc::from_tokens(["x"])];
        assert!(matches!(
            NbModel::train(&unlabeled, 1.0),
            Err(ModelError::UnlabeledDoc(_))
        ));
    }

    #[test]
    fn train_is_order_independent() {
        let docs = vec![
            doc(&["a", "b"], ClassLabel::Sexual),
            doc(&["b", "c"], ClassLabel::Neutral),
            doc(&["a"], ClassLabel::Hatred),
        ];
        let mut rev = docs.clone();
        rev.reverse();
        let a = NbModel::train(&docs, 1.0).unwrap();
        let b = NbModel::train(&rev, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn likelihood_by_hand() {
        // |V| = 4, neutral total = 2, alpha = 1.
        let m = two_doc_model();
        let unseen = m.token_likelihood("zzz", ClassLabel::Neutral, false);
        assert!((unseen - 1.0 / 6.0).abs() < 1e-15);

        // "good" once in neutral -> (1+1)/(2+4).
        let good = m.token_likelihood("good", ClassLabel::Neutral, false);
        assert!((good - 2.0 / 6.0).abs() < 1e-15);

        // All of a class's mass on one token: count 2, total 2 -> 3/6.
        let m = NbModel::train(
            &[
                doc(&["x", "x"], ClassLabel::Sexual),
                doc(&["a", "b", "c"], ClassLabel::Neutral),
            ],
            1.0,
        )
        .unwrap();
        assert_eq!(m.vocabulary_len(), 4);
        assert!((m.token_likelihood("x", ClassLabel::Sexual, false) - 0.5).abs() < 1e-15);
        // Complement of sexual is neutral's counts: (0+1)/(3+4).
        assert!((m.token_likelihood("x", ClassLabel::Sexual, true) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn empty_doc_returns_prior() {
        let m = NbModel::train(
            &[
                doc(&["a"], ClassLabel::Hatred),
                doc(&["b"], ClassLabel::Hatred),
                doc(&["c"], ClassLabel::Neutral),
                doc(&["d"], ClassLabel::Neutral),
                doc(&["e"], ClassLabel::Neutral),
            ],
            1.0,
        )
        .unwrap();
        let empty = TokenizedDoc::from_tokens(Vec::<String>::new());
        assert!((m.posterior(&empty, ClassLabel::Hatred) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn symmetric_model_returns_prior() {
        // Neutral and sexual see identical token distributions, so for the
        // neutral-vs-rest split every likelihood equals its complement.
        let m = NbModel::train(
            &[
                doc(&["a", "b"], ClassLabel::Neutral),
                doc(&["a", "b"], ClassLabel::Sexual),
            ],
            1.0,
        )
        .unwrap();
        let d = doc(&["a", "a", "b", "q"], ClassLabel::Neutral);
        assert!((m.posterior(&d, ClassLabel::Neutral) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spam_ham_matches_exact_fraction() {
        // Exact value 3/4, from wallfilter_oracle::posterior_exact.
        let m = NbModel::train(
            &[
                doc(&["spam"], ClassLabel::Sexual),
                doc(&["spam"], ClassLabel::Sexual),
                doc(&["ham"], ClassLabel::Neutral),
                doc(&["ham"], ClassLabel::Neutral),
            ],
            1.0,
        )
        .unwrap();
        let p = m.posterior(&TokenizedDoc::from_tokens(["spam"]), ClassLabel::Sexual);
        assert!((p - 0.75).abs() < 1e-12, "{p}");
    }

    #[test]
    fn single_class_model_is_certain() {
        let m = NbModel::train(&[doc(&["a"], ClassLabel::Offensive)], 1.0).unwrap();
        let d = TokenizedDoc::from_tokens(["b"]);
        assert_eq!(m.posterior(&d, ClassLabel::Offensive), 1.0);
        assert_eq!(m.complement_posterior(&d, ClassLabel::Offensive), 0.0);
    }

    #[test]
    fn empty_vocabulary_stays_finite() {
        let m = NbModel::train(
            &[doc(&[], ClassLabel::Neutral), doc(&[], ClassLabel::Hatred)],
            1.0,
        )
        .unwrap();
        let p = m.posterior(&TokenizedDoc::from_tokens(["x"]), ClassLabel::Hatred);
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn argmax_ties_prefer_declaration_order() {
        let post = ClassPosterior::new(PerClass::from_fn(|c| if c.is_neutral() { 0.1 } else { 0.5 }));
        assert_eq!(post.argmax, ClassLabel::Sexual);
        let flat = ClassPosterior::new(PerClass::from_fn(|_| 0.2));
        assert_eq!(flat.argmax, ClassLabel::Neutral);
    }

    #[test]
    fn model_file_round_trip() {
        let m = two_doc_model();
        let bytes = m.to_bytes();
        assert_eq!(NbModel::from_bytes(&bytes).unwrap(), m);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("{\n  \"alpha\": 1.0,"));
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn model_file_version_and_truncation() {
        let bytes = two_doc_model().to_bytes();
        let text = String::from_utf8(bytes.clone()).unwrap();
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(
            NbModel::from_bytes(bumped.as_bytes()),
            Err(ModelError::VersionMismatch { found: 2, expected: 1 })
        ));
        assert!(matches!(
            NbModel::from_bytes(&bytes[..bytes.len() / 2]),
            Err(ModelError::CorruptModel(_))
        ));
        let tampered = text.replace("\"total_docs\": 2", "\"total_docs\": 3");
        assert!(matches!(
            NbModel::from_bytes(tampered.as_bytes()),
            Err(ModelError::CorruptModel(_))
        ));
    }
}
