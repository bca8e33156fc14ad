use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed corpus XML: {0}")]
    MalformedXml(String),
    #[error("unknown class label {0:?}")]
    UnknownClass(String),
    #[error("duplicate message id {0:?}")]
    DuplicateId(String),
    #[error("message id must not be empty")]
    EmptyId,
    #[error("corpus too small to split: {labeled} labeled docs, need at least 2")]
    CorpusTooSmall { labeled: usize },
    #[error("test fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("smoothing constant must be a positive finite number, got {0}")]
    NonPositiveAlpha(f64),
    #[error("regularization constant must be a positive finite number, got {0}")]
    NonPositiveLambda(f64),
    #[error("epoch count must be positive")]
    ZeroEpochs,
    #[error("training document {0:?} has no label")]
    UnlabeledDoc(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("test document {0:?} has no gold label")]
    UnlabeledDoc(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}
