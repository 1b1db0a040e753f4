//! Signed feature hashing.
//!
//! Documents become hashed bags of n-grams; tokens become hashed bags of
//! offset-tagged window features. Each feature key is hashed once: the low
//! bits pick the bucket and the top bit picks the sign, which keeps
//! collisions unbiased in expectation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stable_hash;

pub const MAX_TOKENS: usize = 128;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("invalid featurizer config: {0}")]
    InvalidConfig(String),
    #[error("token position {position} out of range for {len} tokens")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("an idf table must be supplied exactly when weighting is tf-idf")]
    IdfMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    TermFrequency,
    TfIdf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturizerConfig {
    pub hash_bits: u32,
    pub ngram_max: usize,
    pub weighting: Weighting,
    pub token_window: usize,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self { hash_bits: 15, ngram_max: 2, weighting: Weighting::TermFrequency, token_window: 2 }
    }
}

impl FeaturizerConfig {
    pub fn dimension(&self) -> usize {
        1usize << self.hash_bits
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(8..=24).contains(&self.hash_bits) {
            return Err(FeatureError::InvalidConfig(format!("hash_bits {} outside 8..=24", self.hash_bits)));
        }
        if !(1..=2).contains(&self.ngram_max) {
            return Err(FeatureError::InvalidConfig(format!("ngram_max {} must be 1 or 2", self.ngram_max)));
        }
        Ok(())
    }
}

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dimension: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dimension: usize) -> Self {
        Self { dimension, indices: Vec::new(), values: Vec::new() }
    }

    /// Builds a vector from unordered pairs, summing duplicates and dropping
    /// entries that cancel to zero.
    ///
    /// Panics if an index is out of range.
    pub fn from_pairs(dimension: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            assert!(i < dimension, "index {i} out of range for dimension {dimension}");
            *acc.entry(i as u32).or_insert(0.0) += v;
        }
        let (indices, values) = acc.into_iter().filter(|&(_, v)| v != 0.0).unzip();
        Self { dimension, indices, values }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().zip(&self.values).map(|(&i, &v)| (i as usize, v))
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&(index as u32)) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    /// Copy with the listed indices removed.
    pub fn without(&self, removed: &[u32]) -> Self {
        let (indices, values) = self.iter().filter(|(i, _)| !removed.contains(&(*i as u32))).map(|(i, v)| (i as u32, v)).unzip();
        Self { dimension: self.dimension, indices, values }
    }
}

/// Lowercases, splits on every non-alphanumeric run and keeps at most
/// [`MAX_TOKENS`] tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .take(MAX_TOKENS)
        .map(str::to_lowercase)
        .collect()
}

fn bucket(key: &str, dimension: usize) -> (usize, f64) {
    let h = stable_hash(key.as_bytes());
    let index = (h as usize) & (dimension - 1);
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (index, sign)
}

fn ngram_keys(tokens: &[String], ngram_max: usize) -> Vec<String> {
    let mut keys = Vec::new();
    for n in 1..=ngram_max {
        for window in tokens.windows(n) {
            keys.push(format!("{n}:{}", window.join("\u{1}")));
        }
    }
    keys
}

/// Per-bucket inverse document frequencies, `ln((1+N)/(1+df)) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    weights: Vec<f64>,
}

impl IdfTable {
    pub fn fit<'a>(documents: impl IntoIterator<Item = &'a [String]>, cfg: &FeaturizerConfig) -> Self {
        let dim = cfg.dimension();
        let mut df = vec![0u32; dim];
        let mut n = 0usize;
        for tokens in documents {
            n += 1;
            let mut seen: Vec<usize> = ngram_keys(tokens, cfg.ngram_max).iter().map(|k| bucket(k, dim).0).collect();
            seen.sort_unstable();
            seen.dedup();
            for b in seen {
                df[b] += 1;
            }
        }
        let weights = df.iter().map(|&d| ((1.0 + n as f64) / (1.0 + f64::from(d))).ln() + 1.0).collect();
        Self { weights }
    }

    pub fn uniform(cfg: &FeaturizerConfig) -> Self {
        Self { weights: vec![1.0; cfg.dimension()] }
    }

    pub fn weight(&self, bucket: usize) -> f64 {
        self.weights[bucket]
    }
}

/// Hashed bag of n-grams with term-frequency (count / number of n-grams)
/// weights, optionally multiplied by idf.
pub fn vectorize_document(
    tokens: &[String],
    cfg: &FeaturizerConfig,
    idf: Option<&IdfTable>,
) -> Result<SparseVector, FeatureError> {
    match (cfg.weighting, idf) {
        (Weighting::TermFrequency, None) | (Weighting::TfIdf, Some(_)) => {}
        _ => return Err(FeatureError::IdfMismatch),
    }
    let dim = cfg.dimension();
    let keys = ngram_keys(tokens, cfg.ngram_max);
    if keys.is_empty() {
        return Ok(SparseVector::zeros(dim));
    }
    let len = keys.len() as f64;
    Ok(SparseVector::from_pairs(
        dim,
        keys.iter().map(|k| {
            let (b, sign) = bucket(k, dim);
            let scale = idf.map_or(1.0, |t| t.weight(b));
            (b, sign * scale / len)
        }),
    ))
}

fn is_capitalized(raw: &str) -> bool {
    raw.chars().next().is_some_and(char::is_uppercase)
}

fn is_digit(raw: &str) -> bool {
    !raw.is_empty() && raw.chars().all(|c| c.is_ascii_digit())
}

/// Window features for `tokens[position]`: every in-range neighbor within
/// `token_window` keyed by its offset, plus shape flags of the raw center
/// token.
pub fn vectorize_token(tokens: &[String], position: usize, cfg: &FeaturizerConfig) -> Result<SparseVector, FeatureError> {
    if position >= tokens.len() {
        return Err(FeatureError::PositionOutOfRange { position, len: tokens.len() });
    }
    let dim = cfg.dimension();
    let w = cfg.token_window as isize;
    let mut keys = Vec::with_capacity(2 * cfg.token_window + 3);
    for offset in -w..=w {
        let at = position as isize + offset;
        if at < 0 || at >= tokens.len() as isize {
            continue;
        }
        keys.push(format!("t{offset}:{}", tokens[at as usize].to_lowercase()));
    }
    let center = &tokens[position];
    if is_capitalized(center) {
        keys.push("shape:cap".into());
    }
    if is_digit(center) {
        keys.push("shape:digit".into());
    }
    Ok(SparseVector::from_pairs(dim, keys.iter().map(|k| bucket(k, dim))))
}

/// Document featurizer with a frozen configuration and optional idf table.
#[derive(Debug, Clone)]
pub struct Featurizer {
    cfg: FeaturizerConfig,
    idf: Option<IdfTable>,
}

impl Featurizer {
    pub fn new(cfg: FeaturizerConfig, idf: Option<IdfTable>) -> Result<Self, FeatureError> {
        cfg.validate()?;
        match (cfg.weighting, &idf) {
            (Weighting::TermFrequency, None) | (Weighting::TfIdf, Some(_)) => Ok(Self { cfg, idf }),
            _ => Err(FeatureError::IdfMismatch),
        }
    }

    pub fn config(&self) -> &FeaturizerConfig {
        &self.cfg
    }

    pub fn dimension(&self) -> usize {
        self.cfg.dimension()
    }

    pub fn document(&self, text: &str) -> SparseVector {
        vectorize_document(&tokenize(text), &self.cfg, self.idf.as_ref()).expect("idf presence checked at construction")
    }

    /// One vector per token.
    pub fn sequence(&self, tokens: &[String]) -> Vec<SparseVector> {
        (0..tokens.len())
            .map(|p| vectorize_token(tokens, p, &self.cfg).expect("position in range"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    fn unigram_cfg() -> FeaturizerConfig {
        FeaturizerConfig { ngram_max: 1, ..FeaturizerConfig::default() }
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Hello, world!"), ["hello", "world"]);
        assert!(tokenize("").is_empty());
        let long: String = (0..200).map(|i| format!("w{i} ")).collect();
        let t = tokenize(&long);
        assert_eq!(t.len(), 128);
        assert_eq!(t[127], "w127");
    }

    #[test]
    fn empty_document_is_the_zero_vector() {
        let v = vectorize_document(&[], &FeaturizerConfig::default(), None).unwrap();
        assert_eq!(v.dimension(), 1 << 15);
        assert_eq!(v.nnz(), 0);
    }

    #[test]
    fn term_frequencies_follow_token_counts() {
        let cfg = unigram_cfg();
        let (ba, sa) = bucket("1:a", cfg.dimension());
        let (bb, sb) = bucket("1:b", cfg.dimension());
        assert_ne!(ba, bb, "test assumes no collision");
        // oracle: explicit count over the multiset {a, a, b}
        let v = vectorize_document(&toks(&["a", "a", "b"]), &cfg, None).unwrap();
        assert!((v.get(ba) - sa * 2.0 / 3.0).abs() < 1e-15);
        assert!((v.get(bb) - sb / 3.0).abs() < 1e-15);
        assert_eq!(v.nnz(), 2);
    }

    #[test]
    fn idf_presence_must_match_weighting() {
        let cfg = unigram_cfg();
        let idf = IdfTable::uniform(&cfg);
        assert_eq!(vectorize_document(&toks(&["a"]), &cfg, Some(&idf)), Err(FeatureError::IdfMismatch));
        let tfidf = FeaturizerConfig { weighting: Weighting::TfIdf, ..cfg };
        assert_eq!(vectorize_document(&toks(&["a"]), &tfidf, None), Err(FeatureError::IdfMismatch));
    }

    #[test]
    fn idf_smoothing_formula() {
        let cfg = unigram_cfg();
        let docs = [toks(&["a", "b"]), toks(&["a"]), toks(&["c"])];
        let idf = IdfTable::fit(docs.iter().map(Vec::as_slice), &cfg);
        let (ba, _) = bucket("1:a", cfg.dimension());
        let (bz, _) = bucket("1:zzz", cfg.dimension());
        assert!((idf.weight(ba) - ((4.0f64 / 3.0).ln() + 1.0)).abs() < 1e-12);
        assert!((idf.weight(bz) - (4.0f64.ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn token_window_boundaries() {
        let cfg = FeaturizerConfig { token_window: 1, ..FeaturizerConfig::default() };
        let t = toks(&["london", "calling"]);
        let v = vectorize_token(&t, 0, &cfg).unwrap();
        let dim = cfg.dimension();
        assert_ne!(v.get(bucket("t0:london", dim).0), 0.0);
        assert_ne!(v.get(bucket("t1:calling", dim).0), 0.0);
        assert_eq!(v.nnz(), 2, "no feature for offset -1 at the left edge");
        assert_eq!(vectorize_token(&t, 2, &cfg), Err(FeatureError::PositionOutOfRange { position: 2, len: 2 }));
    }

    #[test]
    fn window_zero_sees_only_the_center() {
        let cfg = FeaturizerConfig { token_window: 0, ..FeaturizerConfig::default() };
        let a = vectorize_token(&toks(&["x", "Paris", "y"]), 1, &cfg).unwrap();
        let b = vectorize_token(&toks(&["q", "Paris", "r", "s"]), 1, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_features_come_from_the_raw_token() {
        let cfg = FeaturizerConfig { token_window: 0, ..FeaturizerConfig::default() };
        let upper = vectorize_token(&toks(&["Paris"]), 0, &cfg).unwrap();
        let lower = vectorize_token(&toks(&["paris"]), 0, &cfg).unwrap();
        assert_eq!(upper.nnz(), 2);
        assert_eq!(lower.nnz(), 1);
        let digits = vectorize_token(&toks(&["1999"]), 0, &cfg).unwrap();
        assert_eq!(digits.nnz(), 2);
    }

    #[test]
    fn featurizer_is_deterministic() {
        let f = Featurizer::new(FeaturizerConfig::default(), None).unwrap();
        assert_eq!(f.document("the cat sat"), f.document("the cat sat"));
        let t = toks(&["The", "cat"]);
        assert_eq!(f.sequence(&t), f.sequence(&t));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for bad in [
            FeaturizerConfig { hash_bits: 7, ..Default::default() },
            FeaturizerConfig { hash_bits: 25, ..Default::default() },
            FeaturizerConfig { ngram_max: 3, ..Default::default() },
        ] {
            assert!(Featurizer::new(bad, None).is_err());
        }
    }

    proptest! {
        #[test]
        fn indices_stay_in_range(words in proptest::collection::vec("[a-zA-Z0-9]{1,8}", 0..40), bits in 8u32..=16) {
            let cfg = FeaturizerConfig { hash_bits: bits, ..Default::default() };
            let v = vectorize_document(&words, &cfg, None).unwrap();
            prop_assert!(v.indices().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(v.indices().iter().all(|&i| (i as usize) < cfg.dimension()));
            prop_assert!(v.values().iter().all(|&x| x != 0.0));
            for p in 0..words.len() {
                let t = vectorize_token(&words, p, &cfg).unwrap();
                prop_assert!(t.indices().iter().all(|&i| (i as usize) < cfg.dimension()));
            }
        }

        #[test]
        fn tfidf_with_unit_idf_equals_tf(words in proptest::collection::vec("[a-z]{1,6}", 1..30)) {
            let tf_cfg = FeaturizerConfig::default();
            let idf_cfg = FeaturizerConfig { weighting: Weighting::TfIdf, ..tf_cfg.clone() };
            let tf = vectorize_document(&words, &tf_cfg, None).unwrap();
            let tfidf = vectorize_document(&words, &idf_cfg, Some(&IdfTable::uniform(&idf_cfg))).unwrap();
            prop_assert_eq!(tf, tfidf);
        }
    }
}
