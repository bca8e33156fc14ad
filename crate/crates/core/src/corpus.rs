//! Labeled comment corpora: XML ingestion, tokenization and train/test splits.
//!
//! Corpus documents look like
//!
//! ```xml
//! <corpus>
//!   <message id="m1" author="u1" class="neutral">I had a good day</message>
//! </corpus>
//! ```
//!
//! The `class` attribute is optional; unlabeled messages are allowed so the
//! same schema carries live traffic.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CorpusError;
use crate::label::{ClassLabel, PerClass};

/// The labeled English sample corpus shipped with the crate.
pub const BUNDLED_CORPUS_XML: &str = include_str!("../data/corpus.xml");

/// The default English stop list.
pub const BUNDLED_STOP_LIST: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMessage {
    pub id: String,
    pub author_id: String,
    pub text: String,
    pub label: Option<ClassLabel>,
}

/// A preprocessed message: an ordered bag of tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub message_id: String,
    pub tokens: Vec<String>,
    pub label: Option<ClassLabel>,
}

impl TokenizedDoc {
    /// Unlabeled document from already-split tokens.
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        TokenizedDoc {
            message_id: String::new(),
            tokens: tokens.into_iter().map(Into::into).collect(),
            label: None,
        }
    }

    pub fn labeled(mut self, label: ClassLabel) -> Self {
        self.label = Some(label);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopList {
    entries: BTreeSet<String>,
    source_path: String,
}

impl StopList {
    /// Parses the one-token-per-line format. Blank lines and lines starting
    /// with `#` are skipped; entries are lowercased.
    pub fn parse(text: &str, source_path: impl Into<String>) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        StopList {
            entries,
            source_path: source_path.into(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(&text, path.display().to_string()))
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(BUNDLED_STOP_LIST, "<bundled>/stopwords_en.txt")
    }

    pub fn empty() -> Self {
        StopList {
            entries: BTreeSet::new(),
            source_path: String::new(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains(token)
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }
}

/// A parsed corpus together with its label histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<RawMessage>,
    label_histogram: PerClass<usize>,
}

impl Corpus {
    /// Builds a corpus, rejecting empty or repeated ids.
    pub fn new(docs: Vec<RawMessage>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(docs.len());
        for doc in &docs {
            if doc.id.is_empty() {
                return Err(CorpusError::EmptyId);
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        let mut label_histogram = PerClass::default();
        for label in docs.iter().filter_map(|d| d.label) {
            label_histogram[label] += 1;
        }
        Ok(Corpus {
            docs,
            label_histogram,
        })
    }

    pub fn docs(&self) -> &[RawMessage] {
        &self.docs
    }

    pub fn label_histogram(&self) -> &PerClass<usize> {
        &self.label_histogram
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn labeled_len(&self) -> usize {
        self.label_histogram.values().sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        parse_corpus_xml(&bytes)
    }

    /// Serializes back to the corpus schema. Parsing the output yields an
    /// equal corpus.
    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<corpus>\n");
        for doc in &self.docs {
            out.push_str("  <message id=\"");
            out.push_str(&escape(doc.id.as_str()));
            out.push_str("\" author=\"");
            out.push_str(&escape(doc.author_id.as_str()));
            out.push('"');
            if let Some(label) = doc.label {
                out.push_str(" class=\"");
                out.push_str(label.as_str());
                out.push('"');
            }
            out.push('>');
            out.push_str(&escape(doc.text.as_str()));
            out.push_str("</message>\n");
        }
        out.push_str("</corpus>\n");
        out
    }

    /// Applies a preprocessing pipeline to every message.
    pub fn tokenize(&self, pre: &Preprocessing) -> Vec<TokenizedDoc> {
        self.docs.iter().map(|m| pre.apply(m)).collect()
    }
}

fn malformed(reader: &Reader<&[u8]>, msg: impl std::fmt::Display) -> CorpusError {
    CorpusError::MalformedXml(format!("{msg} (at byte {})", reader.buffer_position()))
}

fn read_message_attrs(
    reader: &Reader<&[u8]>,
    start: &BytesStart<'_>,
) -> Result<(String, String, Option<ClassLabel>), CorpusError> {
    let mut id = None;
    let mut author = None;
    let mut label = None;
    for attr in start.attributes() {
        let attr = attr.map_err(|e| malformed(reader, e))?;
        let value = attr
            .unescape_value()
            .map_err(|e| malformed(reader, e))?
            .into_owned();
        match attr.key.as_ref() {
            b"id" => id = Some(value),
            b"author" => author = Some(value),
            b"class" => label = Some(value.parse::<ClassLabel>()?),
            _ => {}
        }
    }
    let id = id.ok_or_else(|| malformed(reader, "<message> without id attribute"))?;
    let author = author.ok_or_else(|| malformed(reader, "<message> without author attribute"))?;
    Ok((id, author, label))
}

/// Parses a corpus document (UTF-8) into a [`Corpus`].
pub fn parse_corpus_xml(bytes: &[u8]) -> Result<Corpus, CorpusError> {
    #[derive(PartialEq)]
    enum State {
        BeforeRoot,
        InRoot,
        InMessage,
        AfterRoot,
    }

    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(false);

    let mut state = State::BeforeRoot;
    let mut docs = Vec::new();
    let mut current: Option<(String, String, Option<ClassLabel>)> = None;
    let mut text = String::new();

    loop {
        let event = reader.read_event().map_err(|e| malformed(&reader, e))?;
        match event {
            Event::Start(e) => match (&state, e.name().as_ref()) {
                (State::BeforeRoot, b"corpus") => state = State::InRoot,
                (State::InRoot, b"message") => {
                    current = Some(read_message_attrs(&reader, &e)?);
                    text.clear();
                    state = State::InMessage;
                }
                (_, name) => {
                    return Err(malformed(
                        &reader,
                        format!("unexpected element <{}>", String::from_utf8_lossy(name)),
                    ))
                }
            },
            Event::Empty(e) => match (&state, e.name().as_ref()) {
                (State::BeforeRoot, b"corpus") => state = State::AfterRoot,
                (State::InRoot, b"message") => {
                    let (id, author_id, label) = read_message_attrs(&reader, &e)?;
                    docs.push(RawMessage {
                        id,
                        author_id,
                        text: String::new(),
                        label,
                    });
                }
                (_, name) => {
                    return Err(malformed(
                        &reader,
                        format!("unexpected element <{}/>", String::from_utf8_lossy(name)),
                    ))
                }
            },
            Event::End(_) => match state {
                State::InMessage => {
                    let (id, author_id, label) = current.take().expect("inside message");
                    docs.push(RawMessage {
                        id,
                        author_id,
                        text: std::mem::take(&mut text),
                        label,
                    });
                    state = State::InRoot;
                }
                State::InRoot => state = State::AfterRoot,
                _ => return Err(malformed(&reader, "unbalanced closing tag")),
            },
            Event::Text(t) => {
                let chunk = t.unescape().map_err(|e| malformed(&reader, e))?;
                if state == State::InMessage {
                    text.push_str(&chunk);
                } else if !chunk.trim().is_empty() {
                    return Err(malformed(&reader, "text outside <message>"));
                }
            }
            Event::CData(c) => {
                if state != State::InMessage {
                    return Err(malformed(&reader, "CDATA outside <message>"));
                }
                let raw = c.into_inner();
                let chunk = std::str::from_utf8(&raw).map_err(|e| malformed(&reader, e))?;
                text.push_str(chunk);
            }
            Event::Eof => break,
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
        }
    }

    if state != State::AfterRoot {
        return Err(CorpusError::MalformedXml(
            "document ended before </corpus>".into(),
        ));
    }
    Corpus::new(docs)
}

/// Lowercases `text` and splits it on every maximal run of characters that
/// are neither letters nor digits. Empty fragments are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Full preprocessing: [`tokenize`] followed by stop-word removal.
pub fn preprocess(msg: &RawMessage, stops: &StopList) -> TokenizedDoc {
    TokenizedDoc {
        message_id: msg.id.clone(),
        tokens: tokenize(&msg.text)
            .into_iter()
            .filter(|t| !stops.contains(t))
            .collect(),
        label: msg.label,
    }
}

/// Raw whitespace split with no case folding and no stop list.
pub fn whitespace_tokens(msg: &RawMessage) -> TokenizedDoc {
    TokenizedDoc {
        message_id: msg.id.clone(),
        tokens: msg.text.split_whitespace().map(str::to_string).collect(),
        label: msg.label,
    }
}

/// How raw text becomes tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Preprocessing {
    /// Lowercase, alphanumeric split, stop-word removal.
    Full(StopList),
    /// Whitespace split only.
    WhitespaceOnly,
}

impl Preprocessing {
    pub fn apply(&self, msg: &RawMessage) -> TokenizedDoc {
        match self {
            Preprocessing::Full(stops) => preprocess(msg, stops),
            Preprocessing::WhitespaceOnly => whitespace_tokens(msg),
        }
    }

    pub fn apply_text(&self, text: &str) -> TokenizedDoc {
        self.apply(&RawMessage {
            id: String::new(),
            author_id: String::new(),
            text: text.to_string(),
            label: None,
        })
    }
}

/// Deterministic stratified train/test split.
///
/// The test side receives `round(n * test_fraction)` docs (at least one, and
/// at least one left for training). That total is apportioned across label
/// strata by largest remainder, and each stratum is shuffled with a ChaCha
/// stream seeded from `seed`. Both halves keep the corpus order.
pub fn split(
    corpus: &Corpus,
    test_fraction: f64,
    seed: u64,
) -> Result<(Corpus, Corpus), CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(test_fraction));
    }
    let labeled = corpus.labeled_len();
    if labeled < 2 {
        return Err(CorpusError::CorpusTooSmall { labeled });
    }

    let n = corpus.len();
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);

    let mut strata: BTreeMap<Option<ClassLabel>, Vec<usize>> = BTreeMap::new();
    for (i, doc) in corpus.docs.iter().enumerate() {
        strata.entry(doc.label).or_default().push(i);
    }

    // Largest-remainder apportionment of n_test over strata.
    let mut quotas: Vec<usize> = Vec::with_capacity(strata.len());
    let mut remainders: Vec<(usize, usize)> = Vec::with_capacity(strata.len());
    for (k, members) in strata.values().enumerate() {
        let scaled = members.len() * n_test;
        quotas.push(scaled / n);
        remainders.push((scaled % n, k));
    }
    let mut leftover = n_test - quotas.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, k) in &remainders {
        if leftover == 0 {
            break;
        }
        quotas[k] += 1;
        leftover -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; n];
    for (members, quota) in strata.values().zip(quotas) {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..quota] {
            in_test[i] = true;
        }
    }

    let (test, train): (Vec<_>, Vec<_>) = corpus
        .docs
        .iter()
        .cloned()
        .zip(in_test)
        .partition(|(_, t)| *t);
    let strip = |v: Vec<(RawMessage, bool)>| v.into_iter().map(|(d, _)| d).collect();
    Ok((Corpus::new(strip(train))?, Corpus::new(strip(test))?))
}
