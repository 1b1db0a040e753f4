//! Line-delimited JSON ingestion.
//!
//! Classification records are `{"id","text","label","domain"}` and tagging
//! records `{"id","tokens","tags","domain"}`. A record without a label goes
//! to the unlabeled split. The optional `"split"` field routes labeled
//! records to the held-out test split (`"test"`); `"pool"` and `"unlabeled"`
//! are accepted as explicit forms of the default routing.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, DomainCorpus, Example, Gold, GoldKey, LabeledExample, Payload, PoolEntry, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Split {
    Pool,
    Unlabeled,
    Test,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tags: Option<Vec<String>>,
    domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

pub fn load_jsonl(path: impl AsRef<Path>, task: Task) -> Result<Vec<DomainCorpus>, CorpusError> {
    let file = File::open(path)?;
    parse_jsonl(BufReader::new(file), task)
}

/// Parses records from any reader; corpora come back in order of each
/// domain's first appearance.
pub fn parse_jsonl(reader: impl BufRead, task: Task) -> Result<Vec<DomainCorpus>, CorpusError> {
    let mut corpora: Vec<DomainCorpus> = Vec::new();
    let mut by_domain: HashMap<String, usize> = HashMap::new();
    let mut seen_ids: std::collections::HashSet<String> = std::collections::HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| CorpusError::Malformed { line: line_no, message };
        let record: Record = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;

        let (payload, gold) = match task {
            Task::Classification => {
                if record.tokens.is_some() || record.tags.is_some() {
                    return Err(malformed(format!("`{}`: tagging fields in a classification record", record.id)));
                }
                let text = record.text.ok_or_else(|| malformed(format!("`{}`: missing `text`", record.id)))?;
                (Payload::Document(text), record.label.map(Gold::Label))
            }
            Task::Tagging => {
                if record.text.is_some() || record.label.is_some() {
                    return Err(malformed(format!("`{}`: classification fields in a tagging record", record.id)));
                }
                let tokens = record.tokens.ok_or_else(|| malformed(format!("`{}`: missing `tokens`", record.id)))?;
                (Payload::TokenSequence(tokens), record.tags.map(Gold::Tags))
            }
        };

        if !seen_ids.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        let example = Example { id: record.id, domain: record.domain, payload };
        let slot = *by_domain.entry(example.domain.clone()).or_insert_with(|| {
            corpora.push(DomainCorpus::new(example.domain.clone()));
            corpora.len() - 1
        });
        let corpus = &mut corpora[slot];

        let split = record.split.unwrap_or(if gold.is_some() { Split::Pool } else { Split::Unlabeled });
        match (split, gold) {
            (Split::Unlabeled, None) => corpus.unlabeled.push(example),
            (Split::Unlabeled, Some(_)) => {
                return Err(malformed(format!("`{}`: unlabeled record carries gold", example.id)))
            }
            (Split::Pool, Some(gold)) => corpus.pool.push(PoolEntry::new(LabeledExample::new(example, gold)?)),
            (Split::Test, Some(gold)) => corpus.test.push(LabeledExample::new(example, gold)?),
            (_, None) => return Err(malformed(format!("`{}`: {split:?} record without gold", example.id))),
        }
    }
    Ok(corpora)
}

/// Writes corpora in the same shape `load_jsonl` reads. Reading pool gold
/// needs the caller's key.
pub fn write_jsonl(corpora: &[DomainCorpus], writer: impl Write, key: &GoldKey) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(writer);
    for corpus in corpora {
        for entry in &corpus.pool {
            emit(&mut out, &entry.example, Some(entry.gold.reveal(key)), None)?;
        }
        for example in &corpus.unlabeled {
            emit(&mut out, example, None, None)?;
        }
        for labeled in &corpus.test {
            emit(&mut out, &labeled.example, Some(&labeled.gold), Some(Split::Test))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn emit(out: &mut impl Write, example: &Example, gold: Option<&Gold>, split: Option<Split>) -> Result<(), CorpusError> {
    let (text, tokens) = match &example.payload {
        Payload::Document(text) => (Some(text.clone()), None),
        Payload::TokenSequence(tokens) => (None, Some(tokens.clone())),
    };
    let (label, tags) = match gold {
        Some(Gold::Label(l)) => (Some(l.clone()), None),
        Some(Gold::Tags(t)) => (None, Some(t.clone())),
        None => (None, None),
    };
    let record = Record { id: example.id.clone(), text, tokens, label, tags, domain: example.domain.clone(), split };
    serde_json::to_writer(&mut *out, &record).map_err(|e| CorpusError::Io(e.into()))?;
    out.write_all(b"\n")?;
    Ok(())
}
