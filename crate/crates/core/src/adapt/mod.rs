//! Domain discriminators and the proxy A-distance.
//!
//! Examples enter as slices of instance vectors: one vector for a
//! document, one per token for a sentence. Discriminators train on
//! instances and are scored per example, where `M(x)` is the mean
//! predicted probability of source origin over the example's instances.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::features::SparseVector;
use crate::neural::{train_supervised, MlpModel, NeuralError, TrainConfig};
use crate::rng::{derive_seed, stream};

/// Class index of the source side in every discriminator.
pub const SOURCE: usize = 0;
/// Class index of the target side.
pub const TARGET: usize = 1;

const TRAIN_FRACTION: f64 = 0.8;
const MIN_SOURCE_PROB: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AdaptError {
    #[error("no unlabeled {0} examples")]
    EmptySide(&'static str),
    #[error("epsilon {0} outside [0, 0.5]")]
    EpsilonOutOfRange(f64),
    #[error("no source domains")]
    NoSources,
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// An example as the discriminator sees it.
pub type Instances<'a> = &'a [SparseVector];

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDiscriminator {
    pub model: MlpModel,
    pub source_domains: Vec<String>,
    pub target_domain: String,
    /// Held-out error before folding.
    pub raw_error: f64,
    /// `min(raw_error, 1 - raw_error)`.
    pub epsilon: f64,
}

impl DomainDiscriminator {
    /// `M(x)`: mean probability of source origin over the instances.
    pub fn source_probability(&self, instances: Instances<'_>) -> f64 {
        source_probability(&self.model, instances)
    }

    pub fn named(mut self, sources: impl IntoIterator<Item = impl Into<String>>, target: impl Into<String>) -> Self {
        self.source_domains = sources.into_iter().map(Into::into).collect();
        self.target_domain = target.into();
        self
    }

    pub fn pad(&self) -> f64 {
        2.0 * (1.0 - 2.0 * self.epsilon)
    }
}

fn source_probability(model: &MlpModel, instances: Instances<'_>) -> f64 {
    if instances.is_empty() {
        return 0.5;
    }
    instances.iter().map(|x| model.predict_proba(x)[SOURCE]).sum::<f64>() / instances.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSimilarity {
    pub per_source: BTreeMap<String, f64>,
    pub epsilons: BTreeMap<String, f64>,
    pub nearest: String,
    pub task_adapted: bool,
}

/// `2(1 - 2ε)`.
pub fn pad_from_epsilon(epsilon: f64) -> Result<f64, AdaptError> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(AdaptError::EpsilonOutOfRange(epsilon));
    }
    Ok(2.0 * (1.0 - 2.0 * epsilon))
}

/// Splits indices `0..n` into a shuffled train part of `round(0.8 n)` and
/// the held-out rest. A single example serves as both.
fn split(n: usize, rng: &mut crate::rng::StreamRng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    if n == 1 {
        return (idx.clone(), idx);
    }
    let cut = ((TRAIN_FRACTION * n as f64).round() as usize).clamp(1, n - 1);
    let held = idx.split_off(cut);
    (idx, held)
}

/// Trains a source-vs-target classifier. Both sides are downsampled to the
/// smaller one, then split 80/20 per side. With `encoder_init` the
/// discriminator starts from that model's encoder; otherwise from a fresh
/// one of width `cfg.hidden_dim`.
pub fn train_discriminator(
    source: &[Instances<'_>],
    target: &[Instances<'_>],
    encoder_init: Option<&MlpModel>,
    input_dim: usize,
    cfg: &TrainConfig,
) -> Result<DomainDiscriminator, AdaptError> {
    if source.is_empty() {
        return Err(AdaptError::EmptySide("source"));
    }
    if target.is_empty() {
        return Err(AdaptError::EmptySide("target"));
    }
    let mut rng = stream(cfg.rng_seed, 10);
    let n = source.len().min(target.len());
    let mut take = |len: usize| {
        let mut idx: Vec<usize> = (0..len).collect();
        idx.shuffle(&mut rng);
        idx.truncate(n);
        idx
    };
    let src_idx = take(source.len());
    let tgt_idx = take(target.len());
    let (src_train, src_held) = split(n, &mut rng);
    let (tgt_train, tgt_held) = split(n, &mut rng);

    let mut train: Vec<(&SparseVector, usize)> = Vec::new();
    for &i in &src_train {
        train.extend(source[src_idx[i]].iter().map(|x| (x, SOURCE)));
    }
    for &i in &tgt_train {
        train.extend(target[tgt_idx[i]].iter().map(|x| (x, TARGET)));
    }
    if train.is_empty() {
        return Err(NeuralError::EmptyTrainingSet.into());
    }

    let init = match encoder_init {
        Some(task) => task.with_fresh_heads(2, false, &mut rng),
        None => MlpModel::new(input_dim, cfg.hidden_dim, 2, false, cfg.dropout_rate, &mut rng),
    };
    let (model, _) = train_supervised(&init, &train, cfg)?;

    let mut wrong = 0usize;
    for &i in &src_held {
        wrong += (source_probability(&model, source[src_idx[i]]) <= 0.5) as usize;
    }
    for &i in &tgt_held {
        wrong += (source_probability(&model, target[tgt_idx[i]]) > 0.5) as usize;
    }
    let raw_error = wrong as f64 / (src_held.len() + tgt_held.len()) as f64;
    Ok(DomainDiscriminator {
        model,
        source_domains: Vec::new(),
        target_domain: String::new(),
        raw_error,
        epsilon: raw_error.min(1.0 - raw_error),
    })
}

/// A named domain's unlabeled examples.
#[derive(Debug, Clone, Copy)]
pub struct NamedSample<'a> {
    pub name: &'a str,
    pub examples: &'a [Instances<'a>],
}

/// One discriminator per source against the target; `nearest` is the
/// source with the smallest PAD, ties going to the smaller name.
/// Task-adapted when `encoder_init` is given.
pub fn domain_similarity(
    sources: &[NamedSample<'_>],
    target: NamedSample<'_>,
    encoder_init: Option<&MlpModel>,
    input_dim: usize,
    cfg: &TrainConfig,
) -> Result<DomainSimilarity, AdaptError> {
    if sources.is_empty() {
        return Err(AdaptError::NoSources);
    }
    let results: Vec<(String, f64)> = sources
        .par_iter()
        .map(|s| {
            let cfg = TrainConfig { rng_seed: derive_seed(cfg.rng_seed, s.name), ..cfg.clone() };
            train_discriminator(s.examples, target.examples, encoder_init, input_dim, &cfg)
                .map(|d| (s.name.to_string(), d.epsilon))
        })
        .collect::<Result<_, _>>()?;
    let epsilons: BTreeMap<String, f64> = results.into_iter().collect();
    let per_source: BTreeMap<String, f64> =
        epsilons.iter().map(|(k, &e)| Ok((k.clone(), pad_from_epsilon(e)?))).collect::<Result<_, AdaptError>>()?;
    let nearest = nearest_source(&per_source).expect("non-empty").to_string();
    Ok(DomainSimilarity { per_source, epsilons, nearest, task_adapted: encoder_init.is_some() })
}

/// Smallest PAD; among equal values the lexicographically first name.
pub fn nearest_source(per_source: &BTreeMap<String, f64>) -> Option<&str> {
    let mut best: Option<(&str, f64)> = None;
    for (name, &pad) in per_source {
        if best.is_none_or(|(_, b)| pad < b) {
            best = Some((name, pad));
        }
    }
    best.map(|b| b.0)
}

/// TAPAD: discriminators initialized from the encoder of a task model
/// trained on the annotation seed.
pub fn tapad_select_domain(
    task_seed_model: &MlpModel,
    sources: &[NamedSample<'_>],
    target: NamedSample<'_>,
    cfg: &TrainConfig,
) -> Result<DomainSimilarity, AdaptError> {
    domain_similarity(sources, target, Some(task_seed_model), task_seed_model.input_dim(), cfg)
}

/// Ranks pool examples by `S(x) = 1/M(x)`, `M` clamped to `[1e-9, 1]`:
/// most target-like first, ties by ascending id.
pub fn selection_scores<'a>(
    discriminator: &DomainDiscriminator,
    pool: impl IntoIterator<Item = (&'a str, Instances<'a>)>,
) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = pool
        .into_iter()
        .map(|(id, inst)| (id.to_string(), selection_score(discriminator.source_probability(inst))))
        .collect();
    rank_descending(&mut ranked);
    ranked
}

pub fn selection_score(source_probability: f64) -> f64 {
    1.0 / source_probability.clamp(MIN_SOURCE_PROB, 1.0)
}

/// Sorts by descending score, ties by ascending id.
pub fn rank_descending(scores: &mut [(String, f64)]) {
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}
