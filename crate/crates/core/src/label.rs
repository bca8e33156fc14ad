use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CorpusError;

/// The five content classes. Declaration order is the tie-break order
/// everywhere a maximum is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Neutral,
    Sexual,
    Hatred,
    Offensive,
    PunIntended,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 5] = [
        ClassLabel::Neutral,
        ClassLabel::Sexual,
        ClassLabel::Hatred,
        ClassLabel::Offensive,
        ClassLabel::PunIntended,
    ];

    pub const NON_NEUTRAL: [ClassLabel; 4] = [
        ClassLabel::Sexual,
        ClassLabel::Hatred,
        ClassLabel::Offensive,
        ClassLabel::PunIntended,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Neutral => "neutral",
            ClassLabel::Sexual => "sexual",
            ClassLabel::Hatred => "hatred",
            ClassLabel::Offensive => "offensive",
            ClassLabel::PunIntended => "pun_intended",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_neutral(self) -> bool {
        self == ClassLabel::Neutral
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassLabel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownClass(s.to_string()))
    }
}

/// One value per class, indexed by [`ClassLabel`].
///
/// Serializes as a map keyed by label name; map keys come out in
/// lexicographic order so documents stay canonical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PerClass<T>([T; 5]);

impl<T> PerClass<T> {
    pub fn from_fn(mut f: impl FnMut(ClassLabel) -> T) -> Self {
        PerClass(ClassLabel::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassLabel, &T)> {
        ClassLabel::ALL.into_iter().zip(self.0.iter())
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.0.iter()
    }

    pub fn map<U>(&self, mut f: impl FnMut(ClassLabel, &T) -> U) -> PerClass<U> {
        PerClass::from_fn(|c| f(c, &self.0[c.index()]))
    }
}

impl<T> Index<ClassLabel> for PerClass<T> {
    type Output = T;

    fn index(&self, c: ClassLabel) -> &T {
        &self.0[c.index()]
    }
}

impl<T> IndexMut<ClassLabel> for PerClass<T> {
    fn index_mut(&mut self, c: ClassLabel) -> &mut T {
        &mut self.0[c.index()]
    }
}

impl<T: Serialize> Serialize for PerClass<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let sorted: BTreeMap<&str, &T> = self.iter().map(|(c, v)| (c.as_str(), v)).collect();
        sorted.serialize(serializer)
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for PerClass<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let mut raw: BTreeMap<String, T> = BTreeMap::deserialize(deserializer)?;
        let mut out: [Option<T>; 5] = Default::default();
        for c in ClassLabel::ALL {
            out[c.index()] = Some(
                raw.remove(c.as_str())
                    .ok_or_else(|| D::Error::custom(format!("missing class {c}")))?,
            );
        }
        if let Some(extra) = raw.keys().next() {
            return Err(D::Error::custom(format!("unknown class {extra:?}")));
        }
        Ok(PerClass(out.map(|v| v.expect("filled above"))))
    }
}
