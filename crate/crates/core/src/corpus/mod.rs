//! Multi-domain corpora and the annotation pool.
//!
//! Pool examples carry their gold annotation inside a [`Hidden`] wrapper.
//! Reading it requires a [`GoldKey`], which only the pool's `annotate`
//! path, the JSONL writer and evaluation code hold; selection code receives
//! bare [`Example`]s and cannot see labels at all.

mod jsonl;
mod pool;
mod synthetic;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use jsonl::{load_jsonl, parse_jsonl, write_jsonl};
pub use pool::AnnotationPool;
pub use synthetic::{generate, CorpusSizes, DomainProfile, SyntheticSpec, ENTITY_TYPES, OUTSIDE_TAG};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("example `{id}` has {tokens} tokens but {tags} tags")]
    TagLengthMismatch { id: String, tokens: usize, tags: usize },
    #[error("duplicate example id `{0}`")]
    DuplicateId(String),
    #[error("unknown example id `{0}`")]
    UnknownId(String),
    #[error("example `{0}` is already annotated")]
    AlreadyAnnotated(String),
    #[error("example `{id}` belongs to excluded domain `{domain}`")]
    ExcludedDomain { id: String, domain: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Tagging,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Document(String),
    TokenSequence(Vec<String>),
}

impl Payload {
    pub fn token_count(&self) -> Option<usize> {
        match self {
            Payload::Document(_) => None,
            Payload::TokenSequence(tokens) => Some(tokens.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gold {
    Label(String),
    Tags(Vec<String>),
}

/// An input without any annotation attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub domain: String,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub example: Example,
    pub gold: Gold,
}

impl LabeledExample {
    /// Pairs an example with its gold annotation, checking that the shapes
    /// agree (documents take a label, token sequences one tag per token).
    pub fn new(example: Example, gold: Gold) -> Result<Self, CorpusError> {
        match (&example.payload, &gold) {
            (Payload::Document(_), Gold::Label(_)) => {}
            (Payload::TokenSequence(tokens), Gold::Tags(tags)) => {
                if tokens.len() != tags.len() {
                    return Err(CorpusError::TagLengthMismatch {
                        id: example.id.clone(),
                        tokens: tokens.len(),
                        tags: tags.len(),
                    });
                }
            }
            _ => {
                return Err(CorpusError::Malformed {
                    line: 0,
                    message: format!("example `{}`: payload and gold shapes differ", example.id),
                })
            }
        }
        Ok(Self { example, gold })
    }
}

/// Capability required to read a [`Hidden`] annotation.
#[derive(Debug)]
pub struct GoldKey {
    _private: (),
}

impl GoldKey {
    /// Grants label access. Selection strategies must never hold one.
    pub fn unlock() -> Self {
        Self { _private: () }
    }
}

/// A gold annotation stored but not readable without a [`GoldKey`].
#[derive(Clone, PartialEq, Eq)]
pub struct Hidden(Gold);

impl Hidden {
    pub fn new(gold: Gold) -> Self {
        Self(gold)
    }

    pub fn reveal(&self, _key: &GoldKey) -> &Gold {
        &self.0
    }
}

impl fmt::Debug for Hidden {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Hidden(..)")
    }
}

/// A purchasable source example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolEntry {
    pub example: Example,
    pub gold: Hidden,
}

impl PoolEntry {
    pub fn new(labeled: LabeledExample) -> Self {
        Self { example: labeled.example, gold: Hidden::new(labeled.gold) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainCorpus {
    pub domain: String,
    pub pool: Vec<PoolEntry>,
    pub unlabeled: Vec<Example>,
    pub test: Vec<LabeledExample>,
}

impl DomainCorpus {
    pub fn new(domain: impl Into<String>) -> Self {
        Self { domain: domain.into(), pool: Vec::new(), unlabeled: Vec::new(), test: Vec::new() }
    }

    /// Unlabeled text for adaptation. Falls back to the pool inputs with
    /// their labels stripped when the corpus has no unlabeled split.
    pub fn unlabeled_or_stripped_pool(&self) -> Vec<&Example> {
        if self.unlabeled.is_empty() {
            self.pool.iter().map(|e| &e.example).collect()
        } else {
            self.unlabeled.iter().collect()
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.pool
            .iter()
            .map(|e| e.example.id.as_str())
            .chain(self.unlabeled.iter().map(|e| e.id.as_str()))
            .chain(self.test.iter().map(|e| e.example.id.as_str()))
    }
}

/// Checks id uniqueness across a whole collection (which also makes the
/// pool, unlabeled and test splits pairwise disjoint).
pub fn validate_collection(corpora: &[DomainCorpus]) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for corpus in corpora {
        for id in corpus.ids() {
            if !seen.insert(id) {
                return Err(CorpusError::DuplicateId(id.to_string()));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str) -> Example {
        Example { id: id.into(), domain: "a".into(), payload: Payload::Document("x".into()) }
    }

    #[test]
    fn hidden_gold_does_not_leak_through_debug() {
        let entry = PoolEntry::new(LabeledExample::new(doc("1"), Gold::Label("positive".into())).unwrap());
        let printed = format!("{entry:?}");
        assert!(!printed.contains("positive"));
        assert_eq!(entry.gold.reveal(&GoldKey::unlock()), &Gold::Label("positive".into()));
    }

    #[test]
    fn tag_length_mismatch_names_the_id() {
        let ex = Example {
            id: "s7".into(),
            domain: "a".into(),
            payload: Payload::TokenSequence(vec!["a".into(), "b".into(), "c".into(), "d".into()]),
        };
        let err = LabeledExample::new(ex, Gold::Tags(vec!["O".into(); 3])).unwrap_err();
        assert!(err.to_string().contains("s7"));
    }

    #[test]
    fn duplicate_ids_across_splits_are_rejected() {
        let mut c = DomainCorpus::new("a");
        c.unlabeled.push(doc("1"));
        c.test.push(LabeledExample::new(doc("1"), Gold::Label("p".into())).unwrap());
        assert!(matches!(validate_collection(&[c]), Err(CorpusError::DuplicateId(id)) if id == "1"));
    }

    #[test]
    fn empty_unlabeled_falls_back_to_pool_inputs() {
        let mut c = DomainCorpus::new("a");
        c.pool.push(PoolEntry::new(LabeledExample::new(doc("1"), Gold::Label("p".into())).unwrap()));
        assert_eq!(c.unlabeled_or_stripped_pool().len(), 1);
        c.unlabeled.push(doc("2"));
        assert_eq!(c.unlabeled_or_stripped_pool()[0].id, "2");
    }
}
