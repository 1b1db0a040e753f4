//! Synthetic multi-domain corpora.
//!
//! The vocabulary is split into one shared block plus one block per topic.
//! Every content token is drawn from the shared block with probability
//! `1 - divergence` and otherwise from a topic block chosen by the domain's
//! mixture weights, so `divergence` scales the distance between any two
//! domains' token distributions linearly. Sentiment-bearing words and entity
//! names live inside the blocks too, which makes topic overlap matter for
//! the downstream task and not only for domain discrimination.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use super::{CorpusError, DomainCorpus, Example, Gold, LabeledExample, Payload, PoolEntry, Task};
use crate::rng::{stream, StreamRng};

pub const OUTSIDE_TAG: &str = "O";
pub const ENTITY_TYPES: [&str; 3] = ["PER", "LOC", "ORG"];

const SYLLABLES: [&str; 16] = ["ka", "lo", "mi", "ne", "ru", "ta", "vo", "ze", "pi", "su", "da", "fe", "go", "hu", "ji", "be"];
const TRIGGERS: [[&str; 3]; 3] = [["mr", "ms", "dr"], ["in", "near", "from"], ["at", "with", "for"]];

// Document shape.
const DOC_LEN: (usize, usize) = (20, 40);
const POLAR_RATE: f64 = 0.2;
const POLAR_NOISE: f64 = 0.25;
const POLAR_SHARE: f64 = 0.2;

// Sentence shape.
const SENT_LEN: (usize, usize) = (6, 14);
const ENTITY_SHARE: f64 = 0.3;
const TRIGGER_RATE: f64 = 0.5;
const ENTITY_CAP_RATE: f64 = 0.8;
const O_CAP_RATE: f64 = 0.05;
const DIGIT_RATE: f64 = 0.04;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSizes {
    pub pool: usize,
    pub unlabeled: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainProfile {
    pub name: String,
    /// Weights over topic blocks; nonnegative and summing to one.
    pub mixture: Vec<f64>,
    /// Class priors (classification) or entity-type priors over
    /// PER/LOC/ORG (tagging). Empty means uniform.
    #[serde(default)]
    pub priors: Vec<f64>,
    /// Expected entities per sentence (tagging only).
    #[serde(default)]
    pub entity_density: f64,
    /// Per-domain override of the spec-wide sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<CorpusSizes>,
}

impl DomainProfile {
    pub fn new(name: &str, mixture: &[f64]) -> Self {
        Self { name: name.into(), mixture: mixture.to_vec(), priors: Vec::new(), entity_density: 0.0, sizes: None }
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.entity_density = density;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub task: Task,
    pub domains: Vec<DomainProfile>,
    pub divergence: f64,
    pub sizes: CorpusSizes,
    pub vocab_size: usize,
    /// Classification only: draw pool labels in exactly balanced
    /// proportions instead of from the priors. Test sets are always balanced.
    #[serde(default = "default_true")]
    pub balanced: bool,
}

fn default_true() -> bool {
    true
}

impl SyntheticSpec {
    /// Five review-like domains in three topic families. `books`/`dvd` and
    /// `electronics`/`kitchen` are near pairs; `airline` stands alone.
    pub fn sentiment_benchmark() -> Self {
        Self {
            task: Task::Classification,
            domains: vec![
                DomainProfile::new("airline", &[0.0, 0.1, 0.9]),
                DomainProfile::new("books", &[0.9, 0.1, 0.0]),
                DomainProfile::new("dvd", &[0.8, 0.1, 0.1]),
                DomainProfile::new("electronics", &[0.1, 0.8, 0.1]),
                DomainProfile::new("kitchen", &[0.1, 0.9, 0.0]),
            ],
            divergence: 0.5,
            sizes: CorpusSizes { pool: 2000, unlabeled: 2000, test: 2000 },
            vocab_size: 2000,
            balanced: true,
        }
    }

    /// Six tagging domains in three twin pairs; each domain's twin is its
    /// nearest source.
    pub fn tagging_benchmark() -> Self {
        let profile = |name: &str, mix: &[f64]| DomainProfile::new(name, mix).with_density(1.5);
        Self {
            task: Task::Tagging,
            domains: vec![
                profile("bc", &[0.9, 0.05, 0.05]),
                profile("bn", &[0.05, 0.9, 0.05]),
                profile("mz", &[0.05, 0.05, 0.9]),
                profile("nw", &[0.1, 0.8, 0.1]),
                profile("tc", &[0.8, 0.1, 0.1]),
                profile("wb", &[0.1, 0.1, 0.8]),
            ],
            divergence: 0.6,
            sizes: CorpusSizes { pool: 3000, unlabeled: 0, test: 1000 },
            vocab_size: 3000,
            balanced: true,
        }
    }

    /// Four topic-specific tagging domains plus `wb`, an entity-poor domain
    /// whose vocabulary mixes every topic and therefore sits close to all
    /// of them.
    pub fn confuser_benchmark() -> Self {
        let profile = |name: &str, mix: &[f64], density: f64| DomainProfile::new(name, mix).with_density(density);
        Self {
            task: Task::Tagging,
            domains: vec![
                profile("bc", &[0.85, 0.05, 0.05, 0.05], 1.5),
                profile("bn", &[0.05, 0.85, 0.05, 0.05], 1.5),
                profile("mz", &[0.05, 0.05, 0.85, 0.05], 1.5),
                profile("nw", &[0.05, 0.05, 0.05, 0.85], 1.5),
                profile("wb", &[0.25, 0.25, 0.25, 0.25], 0.1),
            ],
            divergence: 0.6,
            sizes: CorpusSizes { pool: 3000, unlabeled: 0, test: 1000 },
            vocab_size: 3000,
            balanced: true,
        }
    }

    /// The source whose topic mixture is closest to `target`'s in L1
    /// distance, or `None` when the target is unknown or the closest
    /// distance is shared.
    pub fn nearest_domain(&self, target: &str) -> Option<&str> {
        let t = self.domains.iter().find(|d| d.name == target)?;
        let mut dists: Vec<(f64, &str)> = self
            .domains
            .iter()
            .filter(|d| d.name != target)
            .map(|d| (d.mixture.iter().zip(&t.mixture).map(|(a, b)| (a - b).abs()).sum(), d.name.as_str()))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0));
        match dists.as_slice() {
            [only] => Some(only.1),
            [a, b, ..] if b.0 - a.0 > 1e-9 => Some(a.1),
            _ => None,
        }
    }

    pub fn topic_count(&self) -> usize {
        self.domains.first().map_or(0, |d| d.mixture.len())
    }

    pub fn class_names(&self) -> Vec<String> {
        match self.task {
            Task::Classification => {
                let n = self.domains.iter().map(|d| d.priors.len()).max().unwrap_or(0).max(2);
                if n == 2 {
                    vec!["negative".into(), "positive".into()]
                } else {
                    (0..n).map(|i| format!("class{i}")).collect()
                }
            }
            Task::Tagging => std::iter::once(OUTSIDE_TAG).chain(ENTITY_TYPES).map(String::from).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidSpec(m));
        if self.domains.is_empty() {
            return bad("no domains".into());
        }
        if !(0.0..=1.0).contains(&self.divergence) {
            return bad(format!("divergence {} outside [0,1]", self.divergence));
        }
        let topics = self.topic_count();
        if topics == 0 {
            return bad("mixture weights must be non-empty".into());
        }
        let blocks = topics + 1;
        if self.vocab_size < blocks * 40 {
            return bad(format!("vocab_size {} too small for {} topic blocks (need {})", self.vocab_size, topics, blocks * 40));
        }
        let mut names = std::collections::HashSet::new();
        for d in &self.domains {
            if !names.insert(d.name.as_str()) {
                return bad(format!("duplicate domain `{}`", d.name));
            }
            if d.mixture.len() != topics {
                return bad(format!("domain `{}` has {} mixture weights, expected {topics}", d.name, d.mixture.len()));
            }
            check_distribution(&d.mixture, &format!("mixture of `{}`", d.name))?;
            if !d.priors.is_empty() {
                check_distribution(&d.priors, &format!("priors of `{}`", d.name))?;
                if self.task == Task::Tagging && d.priors.len() != ENTITY_TYPES.len() {
                    return bad(format!("domain `{}`: tagging priors must cover {} entity types", d.name, ENTITY_TYPES.len()));
                }
                if self.task == Task::Classification && d.priors.len() < 2 {
                    return bad(format!("domain `{}`: need at least two class priors", d.name));
                }
            }
            if !(d.entity_density >= 0.0 && d.entity_density.is_finite()) {
                return bad(format!("domain `{}`: entity_density must be >= 0", d.name));
            }
        }
        if self.task == Task::Classification {
            let lens: std::collections::BTreeSet<usize> =
                self.domains.iter().map(|d| d.priors.len()).filter(|&n| n > 0).collect();
            if lens.len() > 1 {
                return bad("class prior lengths differ between domains".into());
            }
        }
        Ok(())
    }
}

fn check_distribution(w: &[f64], what: &str) -> Result<(), CorpusError> {
    if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(CorpusError::InvalidSpec(format!("{what}: weights must be nonnegative")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(CorpusError::InvalidSpec(format!("{what}: weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Word lists of one vocabulary block.
struct Block {
    neutral: WordList,
    /// Classification: one list per class. Tagging: one list per entity type.
    marked: Vec<WordList>,
}

struct WordList {
    words: Vec<String>,
    zipf: WeightedIndex<f64>,
}

impl WordList {
    fn new(words: Vec<String>) -> Self {
        let weights: Vec<f64> = (0..words.len()).map(|r| 1.0 / (r as f64 + 1.0)).collect();
        let zipf = WeightedIndex::new(weights).expect("non-empty word list");
        Self { words, zipf }
    }

    fn draw(&self, rng: &mut StreamRng) -> &str {
        &self.words[self.zipf.sample(rng)]
    }
}

fn pseudo_word(mut index: usize) -> String {
    index += SYLLABLES.len();
    let mut parts = Vec::new();
    while index > 0 {
        parts.push(SYLLABLES[index % SYLLABLES.len()]);
        index /= SYLLABLES.len();
    }
    parts.reverse();
    parts.concat()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

struct Vocabulary {
    blocks: Vec<Block>,
}

impl Vocabulary {
    fn build(spec: &SyntheticSpec, marked_kinds: usize) -> Self {
        let blocks = spec.topic_count() + 1;
        let per_block = spec.vocab_size / blocks;
        let marked_share = match spec.task {
            Task::Classification => POLAR_SHARE,
            Task::Tagging => ENTITY_SHARE,
        };
        let per_kind = ((per_block as f64 * marked_share) as usize / marked_kinds).max(1);
        let mut next = 0usize;
        let mut take = |n: usize| {
            let words: Vec<String> = (next..next + n).map(pseudo_word).collect();
            next += n;
            words
        };
        let blocks = (0..blocks)
            .map(|_| {
                let marked = (0..marked_kinds).map(|_| WordList::new(take(per_kind))).collect();
                let neutral = WordList::new(take(per_block - per_kind * marked_kinds));
                Block { neutral, marked }
            })
            .collect();
        Self { blocks }
    }
}

struct DomainSampler<'a> {
    vocab: &'a Vocabulary,
    divergence: f64,
    topics: WeightedIndex<f64>,
    priors: WeightedIndex<f64>,
    density: f64,
}

impl DomainSampler<'_> {
    fn block(&self, rng: &mut StreamRng) -> &Block {
        if rng.random::<f64>() < self.divergence {
            &self.vocab.blocks[1 + self.topics.sample(rng)]
        } else {
            &self.vocab.blocks[0]
        }
    }

    fn document(&self, label: usize, classes: usize, rng: &mut StreamRng) -> String {
        let len = rng.random_range(DOC_LEN.0..=DOC_LEN.1);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let block = self.block(rng);
            let word = if rng.random::<f64>() < POLAR_RATE {
                let class = if rng.random::<f64>() < POLAR_NOISE {
                    (label + rng.random_range(1..classes)) % classes
                } else {
                    label
                };
                block.marked[class].draw(rng)
            } else {
                block.neutral.draw(rng)
            };
            words.push(word);
        }
        words.join(" ")
    }

    fn sentence(&self, rng: &mut StreamRng) -> (Vec<String>, Vec<String>) {
        let base = rng.random_range(SENT_LEN.0..=SENT_LEN.1);
        let entities = if self.density > 0.0 {
            Poisson::new(self.density).expect("positive rate").sample(rng) as usize
        } else {
            0
        };
        // Each slot is either an O word or an entity (with optional trigger).
        let mut slots: Vec<Option<usize>> = vec![None; base];
        for _ in 0..entities {
            let at = rng.random_range(0..=slots.len());
            slots.insert(at, Some(self.priors.sample(rng)));
        }
        let mut tokens = Vec::with_capacity(slots.len() * 2);
        let mut tags = Vec::with_capacity(slots.len() * 2);
        for slot in slots {
            match slot {
                None => {
                    let word = if rng.random::<f64>() < DIGIT_RATE {
                        rng.random_range(1..3000).to_string()
                    } else {
                        let w = self.block(rng).neutral.draw(rng);
                        if rng.random::<f64>() < O_CAP_RATE { capitalize(w) } else { w.to_string() }
                    };
                    tokens.push(word);
                    tags.push(OUTSIDE_TAG.to_string());
                }
                Some(kind) => {
                    if rng.random::<f64>() < TRIGGER_RATE {
                        tokens.push(TRIGGERS[kind][rng.random_range(0..3)].to_string());
                        tags.push(OUTSIDE_TAG.to_string());
                    }
                    let w = self.block(rng).marked[kind].draw(rng);
                    tokens.push(if rng.random::<f64>() < ENTITY_CAP_RATE { capitalize(w) } else { w.to_string() });
                    tags.push(ENTITY_TYPES[kind].to_string());
                }
            }
        }
        if let Some(first) = tokens.first_mut() {
            *first = capitalize(first);
        }
        (tokens, tags)
    }
}

/// Generates one corpus per domain profile. Output is a pure function of
/// `(spec, seed)`.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<Vec<DomainCorpus>, CorpusError> {
    spec.validate()?;
    let classes = spec.class_names();
    let marked_kinds = match spec.task {
        Task::Classification => classes.len(),
        Task::Tagging => ENTITY_TYPES.len(),
    };
    let vocab = Vocabulary::build(spec, marked_kinds);

    let mut out = Vec::with_capacity(spec.domains.len());
    for (index, profile) in spec.domains.iter().enumerate() {
        let mut rng = stream(seed, index as u64);
        let priors = if profile.priors.is_empty() { vec![1.0; marked_kinds] } else { profile.priors.clone() };
        let sampler = DomainSampler {
            vocab: &vocab,
            divergence: spec.divergence,
            topics: WeightedIndex::new(&profile.mixture).map_err(|e| CorpusError::InvalidSpec(e.to_string()))?,
            priors: WeightedIndex::new(&priors).map_err(|e| CorpusError::InvalidSpec(e.to_string()))?,
            density: profile.entity_density,
        };
        let sizes = profile.sizes.as_ref().unwrap_or(&spec.sizes);
        let mut corpus = DomainCorpus::new(profile.name.clone());

        let make = |kind: char, i: usize, rng: &mut StreamRng, label: Option<usize>| -> LabeledExample {
            let id = format!("{}-{kind}{i:06}", profile.name);
            let (payload, gold) = match spec.task {
                Task::Classification => {
                    let y = label.unwrap_or_else(|| sampler.priors.sample(rng));
                    (Payload::Document(sampler.document(y, classes.len(), rng)), Gold::Label(classes[y].clone()))
                }
                Task::Tagging => {
                    let (tokens, tags) = sampler.sentence(rng);
                    (Payload::TokenSequence(tokens), Gold::Tags(tags))
                }
            };
            let example = Example { id, domain: profile.name.clone(), payload };
            LabeledExample { example, gold }
        };

        let pool_labels = balanced_labels(sizes.pool, classes.len(), spec.balanced, &mut rng);
        for i in 0..sizes.pool {
            let label = pool_labels.as_ref().map(|l| l[i]);
            corpus.pool.push(PoolEntry::new(make('p', i, &mut rng, label)));
        }
        for i in 0..sizes.unlabeled {
            corpus.unlabeled.push(make('u', i, &mut rng, None).example);
        }
        let test_labels = balanced_labels(sizes.test, classes.len(), true, &mut rng);
        for i in 0..sizes.test {
            let label = test_labels.as_ref().map(|l| l[i]);
            corpus.test.push(make('t', i, &mut rng, label));
        }
        out.push(corpus);
    }
    Ok(out)
}

fn balanced_labels(n: usize, classes: usize, balanced: bool, rng: &mut StreamRng) -> Option<Vec<usize>> {
    if !balanced {
        return None;
    }
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(rng);
    Some(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{write_jsonl, GoldKey};
    use std::collections::HashMap;

    fn small(task: Task) -> SyntheticSpec {
        let mut spec = match task {
            Task::Classification => SyntheticSpec::sentiment_benchmark(),
            Task::Tagging => SyntheticSpec::tagging_benchmark(),
        };
        spec.sizes = CorpusSizes { pool: 40, unlabeled: 10, test: 20 };
        spec
    }

    fn unigram(examples: &[&Example]) -> HashMap<String, f64> {
        let mut counts = HashMap::new();
        let mut total = 0.0;
        for e in examples {
            let tokens: Vec<String> = match &e.payload {
                Payload::Document(t) => t.split(' ').map(String::from).collect(),
                Payload::TokenSequence(t) => t.iter().map(|s| s.to_lowercase()).collect(),
            };
            for t in tokens {
                *counts.entry(t).or_insert(0.0) += 1.0;
                total += 1.0;
            }
        }
        counts.values_mut().for_each(|v| *v /= total);
        counts
    }

    fn total_variation(a: &HashMap<String, f64>, b: &HashMap<String, f64>) -> f64 {
        let keys: std::collections::HashSet<&String> = a.keys().chain(b.keys()).collect();
        0.5 * keys.into_iter().map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
    }

    fn two_domain_spec(divergence: f64, n: usize) -> SyntheticSpec {
        SyntheticSpec {
            task: Task::Classification,
            domains: vec![DomainProfile::new("a", &[1.0, 0.0]), DomainProfile::new("b", &[0.0, 1.0])],
            divergence,
            sizes: CorpusSizes { pool: 0, unlabeled: n, test: 0 },
            vocab_size: 1200,
            balanced: true,
        }
    }

    fn domain_tv(spec: &SyntheticSpec, seed: u64) -> f64 {
        let c = generate(spec, seed).unwrap();
        let a: Vec<&Example> = c[0].unlabeled.iter().collect();
        let b: Vec<&Example> = c[1].unlabeled.iter().collect();
        total_variation(&unigram(&a), &unigram(&b))
    }

    #[test]
    fn generation_is_deterministic_to_the_byte() {
        for task in [Task::Classification, Task::Tagging] {
            let spec = small(task);
            let dump = |seed| {
                let mut buf = Vec::new();
                write_jsonl(&generate(&spec, seed).unwrap(), &mut buf, &GoldKey::unlock()).unwrap();
                buf
            };
            assert_eq!(dump(3), dump(3));
            assert_ne!(dump(3), dump(4));
        }
    }

    #[test]
    fn sizes_match_the_spec() {
        let mut spec = small(Task::Classification);
        spec.domains[1].sizes = Some(CorpusSizes { pool: 5, unlabeled: 6, test: 7 });
        let c = generate(&spec, 0).unwrap();
        assert_eq!((c[0].pool.len(), c[0].unlabeled.len(), c[0].test.len()), (40, 10, 20));
        assert_eq!((c[1].pool.len(), c[1].unlabeled.len(), c[1].test.len()), (5, 6, 7));
        crate::corpus::validate_collection(&c).unwrap();
    }

    #[test]
    fn zero_divergence_domains_are_indistinguishable() {
        // oracle: empirical total variation between unigram distributions
        let tv = domain_tv(&two_domain_spec(0.0, 10_000), 11);
        assert!(tv < 0.05, "tv = {tv}");
    }

    #[test]
    fn total_variation_grows_with_divergence() {
        let grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        for seed in 0..5 {
            let tvs: Vec<f64> = grid.iter().map(|&d| domain_tv(&two_domain_spec(d, 1500), seed)).collect();
            assert!(tvs.windows(2).all(|w| w[0] <= w[1]), "seed {seed}: {tvs:?}");
        }
    }

    #[test]
    fn entity_density_is_matched() {
        for density in [0.1, 0.8, 1.5] {
            let spec = SyntheticSpec {
                task: Task::Tagging,
                domains: vec![DomainProfile::new("a", &[1.0]).with_density(density)],
                divergence: 0.5,
                sizes: CorpusSizes { pool: if density < 0.5 { 10_000 } else { 600 }, unlabeled: 0, test: 0 },
                vocab_size: 600,
                balanced: true,
            };
            let c = generate(&spec, 5).unwrap();
            let key = GoldKey::unlock();
            let entities: usize = c[0]
                .pool
                .iter()
                .map(|e| match e.gold.reveal(&key) {
                    Gold::Tags(t) => t.iter().filter(|t| *t != OUTSIDE_TAG).count(),
                    Gold::Label(_) => unreachable!(),
                })
                .sum();
            let mean = entities as f64 / c[0].pool.len() as f64;
            assert!((mean - density).abs() <= 0.1 * density, "density {density}: mean {mean}");
        }
    }

    #[test]
    fn zero_density_produces_only_outside_tags() {
        let mut spec = small(Task::Tagging);
        for d in &mut spec.domains {
            d.entity_density = 0.0;
        }
        let key = GoldKey::unlock();
        for c in generate(&spec, 1).unwrap() {
            for e in &c.pool {
                let Gold::Tags(tags) = e.gold.reveal(&key) else { unreachable!() };
                assert!(tags.iter().all(|t| t == OUTSIDE_TAG));
            }
        }
    }

    #[test]
    fn test_sets_are_balanced() {
        let c = generate(&small(Task::Classification), 2).unwrap();
        let pos = c[0].test.iter().filter(|e| e.gold == Gold::Label("positive".into())).count();
        assert_eq!(pos, 10);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small(Task::Classification);
        spec.domains[0].mixture = vec![0.5, 0.6, -0.1];
        assert!(generate(&spec, 0).is_err());
        let mut spec = small(Task::Tagging);
        spec.domains[0].entity_density = -1.0;
        assert!(spec.validate().is_err());
        let mut spec = small(Task::Classification);
        spec.divergence = 1.5;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn pseudo_words_are_unique_and_alphabetic() {
        let words: std::collections::HashSet<String> = (0..5000).map(pseudo_word).collect();
        assert_eq!(words.len(), 5000);
        assert!(words.iter().all(|w| w.chars().all(|c| c.is_ascii_lowercase())));
    }

    #[test]
    fn designated_nearest_domains() {
        let s = SyntheticSpec::sentiment_benchmark();
        assert_eq!(s.nearest_domain("books"), Some("dvd"));
        assert_eq!(s.nearest_domain("kitchen"), Some("electronics"));
        assert_eq!(s.nearest_domain("airline"), None);
        assert_eq!(s.nearest_domain("nowhere"), None);
        let t = SyntheticSpec::tagging_benchmark();
        for (a, b) in [("bc", "tc"), ("bn", "nw"), ("mz", "wb")] {
            assert_eq!(t.nearest_domain(a), Some(b));
            assert_eq!(t.nearest_domain(b), Some(a));
        }
        let c = SyntheticSpec::confuser_benchmark();
        assert!(["bc", "bn", "mz", "nw"].iter().all(|d| c.nearest_domain(d) == Some("wb")));
    }
}
