//! Linear SVM baseline, one binary problem per class.
//!
//! Training minimizes the L2-regularized hinge loss in the primal with
//! stochastic subgradient steps of size `1 / (lambda * t)`. The bias is the
//! weight of an implicit constant feature and is regularized with the rest.
//! Weights are stored as `scale * v` so a step touches only the non-zero
//! features of the sampled document.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedDoc;
use crate::error::ModelError;
use crate::label::{ClassLabel, PerClass};
use crate::nbayes::{argmax, check_header};

pub const SVM_FORMAT: &str = "wallfilter-svm";
pub const SVM_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub epochs: u32,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            epochs: 20,
            lambda: 1e-4,
            seed: 42,
        }
    }
}

/// Token to feature-column mapping; columns follow sorted token order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VocabIndex {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl VocabIndex {
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let sorted: std::collections::BTreeSet<&str> = tokens.into_iter().collect();
        Self::from_sorted(sorted.into_iter().map(str::to_string).collect())
    }

    fn from_sorted(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        VocabIndex { tokens, index }
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Sparse term counts, sorted by column.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureVector {
    entries: Vec<(usize, u32)>,
}

impl FeatureVector {
    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, k: u32) -> FeatureVector {
        FeatureVector {
            entries: self.entries.iter().map(|&(i, n)| (i, n * k)).collect(),
        }
    }

    fn dot(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, n)| w[i] * n as f64).sum()
    }
}

/// Counts in-vocabulary tokens; unknown tokens are dropped.
pub fn featurize(doc: &TokenizedDoc, vocab: &VocabIndex) -> FeatureVector {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for i in doc.tokens.iter().filter_map(|t| vocab.get(t)) {
        *counts.entry(i).or_default() += 1;
    }
    FeatureVector {
        entries: counts.into_iter().collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    vocab: VocabIndex,
    weights: PerClass<Vec<f64>>,
    bias: PerClass<f64>,
    params: SvmParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmPrediction {
    pub argmax: ClassLabel,
    pub margins: PerClass<f64>,
}

/// Weight vector `scale * v` plus its bias component.
struct ScaledWeights {
    v: Vec<f64>,
    v_bias: f64,
    scale: f64,
}

impl ScaledWeights {
    fn new(dim: usize) -> Self {
        ScaledWeights {
            v: vec![0.0; dim],
            v_bias: 0.0,
            scale: 1.0,
        }
    }

    fn margin(&self, x: &FeatureVector) -> f64 {
        self.scale * (x.dot(&self.v) + self.v_bias)
    }

    fn shrink(&mut self, factor: f64) {
        if factor <= 0.0 {
            self.v.iter_mut().for_each(|w| *w = 0.0);
            self.v_bias = 0.0;
            self.scale = 1.0;
        } else {
            self.scale *= factor;
            if self.scale < 1e-9 {
                self.v.iter_mut().for_each(|w| *w *= self.scale);
                self.v_bias *= self.scale;
                self.scale = 1.0;
            }
        }
    }

    fn add(&mut self, x: &FeatureVector, step: f64) {
        let s = step / self.scale;
        for &(i, n) in x.entries() {
            self.v[i] += s * n as f64;
        }
        self.v_bias += s;
    }

    fn into_parts(self) -> (Vec<f64>, f64) {
        let scale = self.scale;
        (self.v.into_iter().map(|w| w * scale).collect(), self.v_bias * scale)
    }
}

impl SvmModel {
    pub fn train(docs: &[TokenizedDoc], params: SvmParams) -> Result<Self, ModelError> {
        if !(params.lambda > 0.0 && params.lambda.is_finite()) {
            return Err(ModelError::NonPositiveLambda(params.lambda));
        }
        if params.epochs == 0 {
            return Err(ModelError::ZeroEpochs);
        }
        if docs.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let labels = docs
            .iter()
            .map(|d| d.label.ok_or_else(|| ModelError::UnlabeledDoc(d.message_id.clone())))
            .collect::<Result<Vec<_>, _>>()?;

        let vocab = VocabIndex::build(docs.iter().flat_map(|d| d.tokens.iter().map(String::as_str)));
        let features: Vec<FeatureVector> = docs.iter().map(|d| featurize(d, &vocab)).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..docs.len()).collect();
        let mut w: Vec<ScaledWeights> = ClassLabel::ALL
            .iter()
            .map(|_| ScaledWeights::new(vocab.len()))
            .collect();

        let mut t = 0u64;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let step = 1.0 / (params.lambda * t as f64);
                let x = &features[i];
                for c in ClassLabel::ALL {
                    let y = if labels[i] == c { 1.0 } else { -1.0 };
                    let wc = &mut w[c.index()];
                    let violated = y * wc.margin(x) < 1.0;
                    wc.shrink(1.0 - step * params.lambda);
                    if violated {
                        wc.add(x, step * y);
                    }
                }
            }
        }

        let mut weights: PerClass<Vec<f64>> = PerClass::default();
        let mut bias = PerClass::default();
        for (c, wc) in ClassLabel::ALL.into_iter().zip(w) {
            let (v, b) = wc.into_parts();
            weights[c] = v;
            bias[c] = b;
        }
        Ok(SvmModel {
            vocab,
            weights,
            bias,
            params,
        })
    }

    /// Builds a model from explicit parameters.
    pub fn from_parts(
        vocab: VocabIndex,
        weights: PerClass<Vec<f64>>,
        bias: PerClass<f64>,
        params: SvmParams,
    ) -> Result<Self, ModelError> {
        if weights.values().any(|w| w.len() != vocab.len()) {
            return Err(ModelError::CorruptModel(
                "weight vector length differs from vocabulary size".into(),
            ));
        }
        Ok(SvmModel {
            vocab,
            weights,
            bias,
            params,
        })
    }

    pub fn vocab(&self) -> &VocabIndex {
        &self.vocab
    }

    pub fn params(&self) -> SvmParams {
        self.params
    }

    pub fn weights(&self, c: ClassLabel) -> &[f64] {
        &self.weights[c]
    }

    pub fn bias(&self, c: ClassLabel) -> f64 {
        self.bias[c]
    }

    /// Decision value `w_c . x + b_c`.
    pub fn margin(&self, c: ClassLabel, x: &FeatureVector) -> f64 {
        x.dot(&self.weights[c]) + self.bias[c]
    }

    pub fn predict(&self, doc: &TokenizedDoc) -> SvmPrediction {
        let x = featurize(doc, &self.vocab);
        let margins = PerClass::from_fn(|c| self.margin(c, &x));
        SvmPrediction {
            argmax: argmax(&margins),
            margins,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let file = SvmModelFile {
            bias: self.bias,
            epochs: self.params.epochs,
            format: SVM_FORMAT.to_string(),
            format_version: SVM_FORMAT_VERSION,
            labels: ClassLabel::ALL.to_vec(),
            lambda: self.params.lambda,
            seed: self.params.seed,
            vocabulary: self.vocab.tokens.clone(),
            weights: self.weights.clone(),
        };
        let mut out = serde_json::to_vec_pretty(&file).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let value = check_header(bytes, SVM_FORMAT, SVM_FORMAT_VERSION)?;
        let file: SvmModelFile =
            serde_json::from_value(value).map_err(|e| ModelError::CorruptModel(e.to_string()))?;
        if file.labels != ClassLabel::ALL {
            return Err(ModelError::CorruptModel("unexpected label set".into()));
        }
        if file.vocabulary.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::CorruptModel("vocabulary is not sorted".into()));
        }
        let params = SvmParams {
            epochs: file.epochs,
            lambda: file.lambda,
            seed: file.seed,
        };
        Self::from_parts(
            VocabIndex::from_sorted(file.vocabulary),
            file.weights,
            file.bias,
            params,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(|e| ModelError::CorruptModel(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvmModelFile {
    bias: PerClass<f64>,
    epochs: u32,
    format: String,
    format_version: u64,
    labels: Vec<ClassLabel>,
    lambda: f64,
    seed: u64,
    vocabulary: Vec<String>,
    weights: PerClass<Vec<f64>>,
}
