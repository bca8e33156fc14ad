//! Held-out evaluation and the Naive Bayes vs. SVM comparison.
//!
//! Reports are plain serde documents. Struct fields are declared in
//! alphabetical order so the JSON form is canonical; timing fields are the
//! only non-deterministic values and [`ComparisonReport::without_timings`]
//! zeroes them for byte comparisons.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{split, Corpus, Preprocessing, StopList, TokenizedDoc};
use crate::error::{EvalError, ModelError};
use crate::label::{ClassLabel, PerClass};
use crate::nbayes::{NbModel, DEFAULT_ALPHA};
use crate::svm::{SvmModel, SvmParams};

/// Anything that maps a document to a single label.
pub trait Classifier {
    fn predict_label(&self, doc: &TokenizedDoc) -> ClassLabel;
}

impl Classifier for NbModel {
    fn predict_label(&self, doc: &TokenizedDoc) -> ClassLabel {
        self.classify(doc).argmax
    }
}

impl Classifier for SvmModel {
    fn predict_label(&self, doc: &TokenizedDoc) -> ClassLabel {
        self.predict(doc).argmax
    }
}

impl<F: Fn(&TokenizedDoc) -> ClassLabel> Classifier for F {
    fn predict_label(&self, doc: &TokenizedDoc) -> ClassLabel {
        self(doc)
    }
}

/// Gold label (outer key) by predicted label (inner key).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: PerClass<PerClass<u64>>,
}

impl ConfusionMatrix {
    pub fn add(&mut self, gold: ClassLabel, predicted: ClassLabel) {
        self.counts[gold][predicted] += 1;
    }

    pub fn get(&self, gold: ClassLabel, predicted: ClassLabel) -> u64 {
        self.counts[gold][predicted]
    }

    pub fn trace(&self) -> u64 {
        ClassLabel::ALL.iter().map(|&c| self.get(c, c)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flat_map(|row| row.values()).sum()
    }

    pub fn row_sum(&self, gold: ClassLabel) -> u64 {
        self.counts[gold].values().sum()
    }

    pub fn column_sum(&self, predicted: ClassLabel) -> u64 {
        self.counts.values().map(|row| row[predicted]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub correct: u64,
    pub incorrect: u64,
    /// Explanations for metrics defined by convention (zero denominators).
    pub notes: Vec<String>,
    pub per_class: PerClass<ClassMetrics>,
    pub predict_time_ms: f64,
    pub total: u64,
    pub train_time_ms: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

impl EvalReport {
    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    fn from_confusion(confusion: ConfusionMatrix, predict_time_ms: f64) -> Self {
        let total = confusion.total();
        let correct = confusion.trace();
        let mut notes = Vec::new();
        let per_class = PerClass::from_fn(|c| {
            let tp = confusion.get(c, c);
            let predicted = confusion.column_sum(c);
            let support = confusion.row_sum(c);
            if predicted == 0 {
                notes.push(format!("precision({c}): class never predicted, defined as 0"));
            }
            if support == 0 {
                notes.push(format!("recall({c}): class absent from test set, defined as 0"));
            }
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                f1,
                precision,
                recall,
                support,
            }
        });
        EvalReport {
            accuracy: ratio(correct, total),
            confusion,
            correct,
            incorrect: total - correct,
            notes,
            per_class,
            predict_time_ms,
            total,
            train_time_ms: 0.0,
        }
    }

    /// Plain-text summary with a correct/incorrect/time block and the
    /// per-class table.
    pub fn render_table(&self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{title}");
        let _ = writeln!(
            out,
            "  Correctly classified    {:>6}  {:>7.2}%",
            self.correct,
            100.0 * self.accuracy
        );
        let _ = writeln!(
            out,
            "  Incorrectly classified  {:>6}  {:>7.2}%",
            self.incorrect,
            100.0 * (1.0 - self.accuracy)
        );
        let _ = writeln!(out, "  Total                   {:>6}", self.total);
        let _ = writeln!(out, "  Train time (ms)         {:>12.3}", self.train_time_ms);
        let _ = writeln!(out, "  Predict time (ms)       {:>12.3}", self.predict_time_ms);
        let _ = writeln!(
            out,
            "  {:<14} {:>9} {:>9} {:>9} {:>8}",
            "class", "precision", "recall", "f1", "support"
        );
        for (c, m) in self.per_class.iter() {
            let _ = writeln!(
                out,
                "  {:<14} {:>9.3} {:>9.3} {:>9.3} {:>8}",
                c.as_str(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            );
        }
        for note in &self.notes {
            let _ = writeln!(out, "  note: {note}");
        }
        out
    }
}

/// Scores `classifier` on labeled `test` docs. Prediction time is measured
/// around the full pass; train time is left at zero for the caller to fill.
pub fn evaluate<C: Classifier + ?Sized>(
    classifier: &C,
    test: &[TokenizedDoc],
) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let gold = test
        .iter()
        .map(|d| d.label.ok_or_else(|| EvalError::UnlabeledDoc(d.message_id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let start = Instant::now();
    let predicted: Vec<ClassLabel> = test.iter().map(|d| classifier.predict_label(d)).collect();
    let elapsed = start.elapsed();
    let mut confusion = ConfusionMatrix::default();
    for (g, p) in gold.into_iter().zip(predicted) {
        confusion.add(g, p);
    }
    Ok(EvalReport::from_confusion(confusion, millis(elapsed)))
}

/// Settings shared by the comparison and the ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub alpha: f64,
    pub seed: u64,
    pub svm: SvmParams,
    pub test_fraction: f64,
    pub timing_runs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            alpha: DEFAULT_ALPHA,
            seed: 42,
            svm: SvmParams::default(),
            test_fraction: 0.2,
            timing_runs: 5,
        }
    }
}

impl BenchConfig {
    /// SHA-256 over the canonical config document plus the stop list.
    pub fn fingerprint(&self, stops: &StopList) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        for entry in stops.entries() {
            h.update(b"\n");
            h.update(entry.as_bytes());
        }
        hex(&h.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the corpus in its canonical XML form.
pub fn corpus_fingerprint(corpus: &Corpus) -> String {
    hex(&Sha256::digest(corpus.to_xml().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationVariant {
    pub description: String,
    pub report: EvalReport,
    pub tokenization: String,
    pub vocabulary_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub with_preprocessing: AblationVariant,
    pub without_preprocessing: AblationVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub ablation: AblationReport,
    pub config_fingerprint: String,
    pub corpus_fingerprint: String,
    pub majority_baseline: f64,
    pub majority_label: ClassLabel,
    pub nb: EvalReport,
    pub svm: EvalReport,
    pub test_size: usize,
    pub train_size: usize,
}

/// Trains `runs` times and returns the last model with the median duration.
fn timed_train<M>(
    runs: usize,
    mut train: impl FnMut() -> Result<M, ModelError>,
) -> Result<(M, f64), ModelError> {
    let mut times = Vec::with_capacity(runs.max(1));
    let mut model = None;
    for _ in 0..runs.max(1) {
        let start = Instant::now();
        let m = train()?;
        times.push(millis(start.elapsed()));
        model = Some(m);
    }
    Ok((model.expect("at least one run"), median(times)))
}

fn timed_eval<C: Classifier>(
    runs: usize,
    classifier: &C,
    test: &[TokenizedDoc],
    train_time_ms: f64,
) -> Result<EvalReport, EvalError> {
    let mut times = Vec::with_capacity(runs.max(1));
    let mut report = None;
    for _ in 0..runs.max(1) {
        let r = evaluate(classifier, test)?;
        times.push(r.predict_time_ms);
        report = Some(r);
    }
    let mut report = report.expect("at least one run");
    report.predict_time_ms = median(times);
    report.train_time_ms = train_time_ms;
    Ok(report)
}

fn split_nonempty(corpus: &Corpus, cfg: &BenchConfig) -> Result<(Corpus, Corpus), EvalError> {
    if corpus.labeled_len() == 0 {
        return Err(ModelError::EmptyTrainingSet.into());
    }
    Ok(split(corpus, cfg.test_fraction, cfg.seed)?)
}

fn nb_variant(
    train: &Corpus,
    test: &Corpus,
    pre: &Preprocessing,
    cfg: &BenchConfig,
) -> Result<(EvalReport, usize), EvalError> {
    let train_docs = train.tokenize(pre);
    let test_docs = test.tokenize(pre);
    let (model, train_ms) = timed_train(cfg.timing_runs, || NbModel::train(&train_docs, cfg.alpha))?;
    let report = timed_eval(cfg.timing_runs, &model, &test_docs, train_ms)?;
    Ok((report, model.vocabulary_len()))
}

/// Runs the Naive Bayes pipeline with full preprocessing and with plain
/// whitespace tokenization on the same split.
pub fn timing_preprocessing_ablation(
    corpus: &Corpus,
    stops: &StopList,
    cfg: &BenchConfig,
) -> Result<AblationReport, EvalError> {
    let (train, test) = split_nonempty(corpus, cfg)?;
    ablation_on_split(&train, &test, stops, cfg)
}

fn ablation_on_split(
    train: &Corpus,
    test: &Corpus,
    stops: &StopList,
    cfg: &BenchConfig,
) -> Result<AblationReport, EvalError> {
    let (with_report, with_vocab) =
        nb_variant(train, test, &Preprocessing::Full(stops.clone()), cfg)?;
    let (without_report, without_vocab) =
        nb_variant(train, test, &Preprocessing::WhitespaceOnly, cfg)?;
    Ok(AblationReport {
        with_preprocessing: AblationVariant {
            description: "with preprocessing: lowercase, split on non-alphanumerics, stop words removed"
                .into(),
            report: with_report,
            tokenization: "full".into(),
            vocabulary_size: with_vocab,
        },
        without_preprocessing: AblationVariant {
            description: "without preprocessing: raw whitespace split, stop list disabled".into(),
            report: without_report,
            tokenization: "whitespace".into(),
            vocabulary_size: without_vocab,
        },
    })
}

/// Trains and scores both classifiers on one split and one feature set.
pub fn benchmark_compare(
    corpus: &Corpus,
    stops: &StopList,
    cfg: &BenchConfig,
) -> Result<ComparisonReport, EvalError> {
    let (train, test) = split_nonempty(corpus, cfg)?;
    let pre = Preprocessing::Full(stops.clone());
    let train_docs = train.tokenize(&pre);
    let test_docs = test.tokenize(&pre);

    let (nb, nb_train_ms) =
        timed_train(cfg.timing_runs, || NbModel::train(&train_docs, cfg.alpha))?;
    let nb_report = timed_eval(cfg.timing_runs, &nb, &test_docs, nb_train_ms)?;

    let (svm, svm_train_ms) =
        timed_train(cfg.timing_runs, || SvmModel::train(&train_docs, cfg.svm))?;
    let svm_report = timed_eval(cfg.timing_runs, &svm, &test_docs, svm_train_ms)?;

    let hist = train.label_histogram();
    let mut majority_label = ClassLabel::Neutral;
    for (c, &n) in hist.iter() {
        if n > hist[majority_label] {
            majority_label = c;
        }
    }
    let majority_baseline = ratio(
        test.label_histogram()[majority_label] as u64,
        test.labeled_len() as u64,
    );

    Ok(ComparisonReport {
        ablation: ablation_on_split(&train, &test, stops, cfg)?,
        config_fingerprint: cfg.fingerprint(stops),
        corpus_fingerprint: corpus_fingerprint(corpus),
        majority_baseline,
        majority_label,
        nb: nb_report,
        svm: svm_report,
        test_size: test.len(),
        train_size: train.len(),
    })
}

impl ComparisonReport {
    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Copy with every timing field set to zero.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for rep in [
            &mut r.nb,
            &mut r.svm,
            &mut r.ablation.with_preprocessing.report,
            &mut r.ablation.without_preprocessing.report,
        ] {
            rep.train_time_ms = 0.0;
            rep.predict_time_ms = 0.0;
        }
        r
    }

    /// Two-column table: correct / incorrect / time for each classifier,
    /// followed by the preprocessing ablation.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let row = |out: &mut String, name: &str, a: String, b: String| {
            let _ = writeln!(out, "{name:<26} {a:>16} {b:>16}");
        };
        let pct = |n: u64, total: u64| format!("{n} ({:.2}%)", 100.0 * ratio(n, total));
        let _ = writeln!(
            out,
            "Train {} / test {} docs, majority baseline {:.2}% ({})",
            self.train_size,
            self.test_size,
            100.0 * self.majority_baseline,
            self.majority_label
        );
        row(&mut out, "", "Naive Bayes".into(), "SVM".into());
        row(
            &mut out,
            "Correctly classified",
            pct(self.nb.correct, self.nb.total),
            pct(self.svm.correct, self.svm.total),
        );
        row(
            &mut out,
            "Incorrectly classified",
            pct(self.nb.incorrect, self.nb.total),
            pct(self.svm.incorrect, self.svm.total),
        );
        row(
            &mut out,
            "Train time (ms)",
            format!("{:.3}", self.nb.train_time_ms),
            format!("{:.3}", self.svm.train_time_ms),
        );
        row(
            &mut out,
            "Predict time (ms)",
            format!("{:.3}", self.nb.predict_time_ms),
            format!("{:.3}", self.svm.predict_time_ms),
        );
        let _ = writeln!(out);
        let with = &self.ablation.with_preprocessing;
        let without = &self.ablation.without_preprocessing;
        row(
            &mut out,
            "Naive Bayes",
            "with preproc.".into(),
            "without preproc.".into(),
        );
        row(
            &mut out,
            "Vocabulary size",
            with.vocabulary_size.to_string(),
            without.vocabulary_size.to_string(),
        );
        row(
            &mut out,
            "Correctly classified",
            pct(with.report.correct, with.report.total),
            pct(without.report.correct, without.report.total),
        );
        row(
            &mut out,
            "Train time (ms)",
            format!("{:.3}", with.report.train_time_ms),
            format!("{:.3}", without.report.train_time_ms),
        );
        row(
            &mut out,
            "Predict time (ms)",
            format!("{:.3}", with.report.predict_time_ms),
            format!("{:.3}", without.report.predict_time_ms),
        );
        out
    }
}
