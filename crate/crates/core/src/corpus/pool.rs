use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{CorpusError, DomainCorpus, Example, GoldKey, LabeledExample, PoolEntry};

/// Source examples whose labels can be bought one at a time.
///
/// Entries are keyed by id, so every listing is in stable id order.
#[derive(Debug, Clone)]
pub struct AnnotationPool {
    entries: BTreeMap<String, PoolEntry>,
    annotated: Vec<String>,
    annotated_set: HashSet<String>,
    excluded_domains: BTreeSet<String>,
}

impl AnnotationPool {
    pub fn new(entries: impl IntoIterator<Item = PoolEntry>) -> Result<Self, CorpusError> {
        let mut map = BTreeMap::new();
        for entry in entries {
            let id = entry.example.id.clone();
            if map.insert(id.clone(), entry).is_some() {
                return Err(CorpusError::DuplicateId(id));
            }
        }
        Ok(Self {
            entries: map,
            annotated: Vec::new(),
            annotated_set: HashSet::new(),
            excluded_domains: BTreeSet::new(),
        })
    }

    /// Pools every entry of the given source corpora.
    pub fn from_sources<'a>(sources: impl IntoIterator<Item = &'a DomainCorpus>) -> Result<Self, CorpusError> {
        Self::new(sources.into_iter().flat_map(|c| c.pool.iter().cloned()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn budget_spent(&self) -> usize {
        self.annotated.len()
    }

    /// Annotated ids in purchase order.
    pub fn annotated(&self) -> &[String] {
        &self.annotated
    }

    pub fn is_annotated(&self, id: &str) -> bool {
        self.annotated_set.contains(id)
    }

    pub fn excluded_domains(&self) -> &BTreeSet<String> {
        &self.excluded_domains
    }

    pub fn exclude_domain(&mut self, domain: impl Into<String>) {
        self.excluded_domains.insert(domain.into());
    }

    pub fn domains(&self) -> BTreeSet<&str> {
        self.entries.values().map(|e| e.example.domain.as_str()).collect()
    }

    pub fn example(&self, id: &str) -> Option<&Example> {
        self.entries.get(id).map(|e| &e.example)
    }

    /// All entries' inputs, annotated or not, in id order.
    pub fn examples(&self) -> impl Iterator<Item = &Example> {
        self.entries.values().map(|e| &e.example)
    }

    /// Candidates still available for purchase, in id order. Gold is not
    /// reachable from the returned values.
    pub fn remaining(&self) -> Vec<&Example> {
        self.entries
            .values()
            .filter(|e| !self.annotated_set.contains(&e.example.id))
            .filter(|e| !self.excluded_domains.contains(&e.example.domain))
            .map(|e| &e.example)
            .collect()
    }

    pub fn remaining_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| {
                !self.annotated_set.contains(&e.example.id) && !self.excluded_domains.contains(&e.example.domain)
            })
            .count()
    }

    /// Reveals the gold annotation of each id and charges the budget.
    ///
    /// The call is atomic: if any id is rejected nothing is annotated.
    pub fn annotate(&mut self, ids: &[String]) -> Result<Vec<LabeledExample>, CorpusError> {
        let mut batch = HashSet::new();
        for id in ids {
            let entry = self.entries.get(id).ok_or_else(|| CorpusError::UnknownId(id.clone()))?;
            if self.annotated_set.contains(id) || !batch.insert(id.as_str()) {
                return Err(CorpusError::AlreadyAnnotated(id.clone()));
            }
            if self.excluded_domains.contains(&entry.example.domain) {
                return Err(CorpusError::ExcludedDomain { id: id.clone(), domain: entry.example.domain.clone() });
            }
        }
        let key = GoldKey::unlock();
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            let entry = &self.entries[id];
            out.push(LabeledExample { example: entry.example.clone(), gold: entry.gold.reveal(&key).clone() });
            self.annotated_set.insert(id.clone());
            self.annotated.push(id.clone());
        }
        Ok(out)
    }

    /// Labeled copies of everything bought so far, in purchase order.
    pub fn labeled(&self) -> Vec<LabeledExample> {
        let key = GoldKey::unlock();
        self.annotated
            .iter()
            .map(|id| {
                let entry = &self.entries[id];
                LabeledExample { example: entry.example.clone(), gold: entry.gold.reveal(&key).clone() }
            })
            .collect()
    }

    /// Entries in excluded domains that were never annotated.
    pub fn excluded_unannotated_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| {
                self.excluded_domains.contains(&e.example.domain) && !self.annotated_set.contains(&e.example.id)
            })
            .count()
    }
}
